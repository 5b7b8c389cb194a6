//! Vector objectives: the Lamé and DO2DK benchmark families, the box-distance
//! penalty they share, and the known front charts used to build reference sets.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::scalarization::chebyshev_unchecked;

/// A vector-valued objective `g: R^d -> R^m`.
///
/// Implementations must be deterministic: the same `x` yields bit-identical
/// output.
pub trait Objective<T: Scalar>: Send + Sync {
    /// Search-space dimension `d`.
    fn dim(&self) -> usize;

    /// Image dimension `m`.
    fn n_objectives(&self) -> usize;

    /// Writes `g(x)` into `out` (length `m`).
    fn evaluate_into(&self, x: &[T], out: &mut [T]);

    fn evaluate(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_objectives()];
        self.evaluate_into(x, &mut out);
        out
    }

    /// Known parametrization of the front, if any.
    fn front_chart(&self) -> Result<FrontChart<T>> {
        Err(Error::Unsupported(
            "objective has no known front parametrization".into(),
        ))
    }
}

/// Euclidean distance from `x` to the unit box `[0, 1]^d`.
pub fn dist_to_box<T: Scalar>(x: &[T]) -> T {
    x.iter()
        .map(|&xi| {
            let r = xi - xi.max(T::zero()).min(T::one());
            r * r
        })
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

/// Built-in benchmark problems.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem<T> {
    /// Lamé superspheres; `gamma` sets the front curvature (< 1 convex,
    /// 1 linear, > 1 concave).
    Lame { gamma: T, d: usize },
    /// DO2DK; `k` controls the number of front oscillations, `s` the skew.
    Do2dk { k: u32, s: T, d: usize },
}

impl<T: Scalar> Problem<T> {
    pub fn lame(gamma: T, d: usize) -> Result<Self> {
        if !gamma.is_finite() || gamma <= T::zero() {
            return Err(invalid(format!("Lamé gamma must be positive, got {gamma}")));
        }
        if d < 2 {
            return Err(invalid("Lamé needs d >= 2"));
        }
        Ok(Problem::Lame { gamma, d })
    }

    pub fn do2dk(k: u32, s: T, d: usize) -> Result<Self> {
        if k < 1 {
            return Err(invalid("DO2DK needs k >= 1"));
        }
        if !s.is_finite() || s <= T::zero() {
            return Err(invalid(format!("DO2DK s must be positive, got {s}")));
        }
        if d < 2 {
            return Err(invalid("DO2DK needs d >= 2"));
        }
        Ok(Problem::Do2dk { k, s, d })
    }

    /// Looks a built-in up by name. Unused parameters are ignored.
    pub fn from_name(name: &str, gamma: T, k: u32, s: T, d: usize) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "lame" | "lamé" => Self::lame(gamma, d),
            "do2dk" => Self::do2dk(k, s, d),
            other => Err(Error::Unsupported(format!("unknown problem '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Lame { .. } => "lame",
            Problem::Do2dk { .. } => "do2dk",
        }
    }

    /// Coefficient of the `dist(x, [0,1]^d)` penalty added to every component.
    pub fn penalty_coefficient(&self) -> T {
        match *self {
            Problem::Lame { gamma, .. } => T::PI() / gamma,
            Problem::Do2dk { .. } => T::lit(10.0),
        }
    }

    /// Objective values without the box penalty.
    pub fn evaluate_unpenalized(&self, x: &[T], out: &mut [T]) {
        match *self {
            Problem::Lame { gamma, .. } => lame_raw(x, gamma, out),
            Problem::Do2dk { k, s, .. } => do2dk_raw(x, k, s, out),
        }
    }
}

impl<T: Scalar> fmt::Display for Problem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Problem::Lame { gamma, d } => write!(f, "lame(gamma={gamma}, d={d})"),
            Problem::Do2dk { k, s, d } => write!(f, "do2dk(k={k}, s={s}, d={d})"),
        }
    }
}

impl<T: Scalar> Objective<T> for Problem<T> {
    fn dim(&self) -> usize {
        match *self {
            Problem::Lame { d, .. } | Problem::Do2dk { d, .. } => d,
        }
    }

    fn n_objectives(&self) -> usize {
        2
    }

    fn evaluate_into(&self, x: &[T], out: &mut [T]) {
        self.evaluate_unpenalized(x, out);
        let penalty = self.penalty_coefficient() * dist_to_box(x);
        for o in out.iter_mut() {
            *o = *o + penalty;
        }
    }

    fn front_chart(&self) -> Result<FrontChart<T>> {
        let problem = self.clone();
        let d = self.dim();
        Ok(FrontChart::new(2, d, move |r, out| {
            const STACK: usize = 64;
            if d <= STACK {
                let mut x = [T::zero(); STACK];
                x[0] = r;
                problem.evaluate_into(&x[..d], out);
            } else {
                let mut x = vec![T::zero(); d];
                x[0] = r;
                problem.evaluate_into(&x, out);
            }
        }))
    }
}

/// Lamé objectives including the penalty term.
pub fn lame_eval<T: Scalar>(x: &[T], gamma: T) -> [T; 2] {
    let mut out = [T::zero(); 2];
    lame_raw(x, gamma, &mut out);
    let penalty = T::PI() / gamma * dist_to_box(x);
    [out[0] + penalty, out[1] + penalty]
}

/// DO2DK objectives including the penalty term.
pub fn do2dk_eval<T: Scalar>(x: &[T], k: u32, s: T) -> [T; 2] {
    let mut out = [T::zero(); 2];
    do2dk_raw(x, k, s, &mut out);
    let penalty = T::lit(10.0) * dist_to_box(x);
    [out[0] + penalty, out[1] + penalty]
}

fn lame_raw<T: Scalar>(x: &[T], gamma: T, out: &mut [T]) {
    let half_pi = T::FRAC_PI_2();
    let exponent = T::lit(2.0) / gamma;
    let r = x[1..].iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    let scale = T::one() + r;
    let a1 = half_pi * x[0];
    out[0] = a1.cos().abs().powf(exponent) * scale;
    out[1] = a1.sin().abs().powf(exponent) * scale;
}

fn do2dk_raw<T: Scalar>(x: &[T], k: u32, s: T, out: &mut [T]) {
    let d = x.len();
    let pi = T::PI();
    let half_pi = T::FRAC_PI_2();
    let two = T::lit(2.0);
    let kf = T::from_u32(k).expect("k representable");

    let tail = x[1..].iter().fold(T::zero(), |a, &v| a + v);
    let r_a = T::one() + T::lit(9.0) / T::from_count(d - 1) * tail;
    let centered = x[0] - T::lit(0.5);
    let r_b = T::lit(5.0)
        + T::lit(10.0) * centered * centered
        + two.powf(s / two) * (two * kf * pi * x[0]).cos() / kf;
    let phase = T::one() + (two.powf(s) - T::one()) / two.powf(s + two);
    let radius = r_a * r_b;

    out[0] = (half_pi * x[0] + phase * pi + T::one()).sin() * radius;
    out[1] = ((half_pi * x[0] + pi).cos() + T::one()) * radius;
}

type ChartFn<T> = Arc<dyn Fn(T, &mut [T]) + Send + Sync>;

/// Parametrization `h: [0,1] -> R^m` of a front, together with the map from
/// the chart coordinate to a decision vector on the optimal edge
/// `r -> (r, 0, ..., 0)`.
#[derive(Clone)]
pub struct FrontChart<T> {
    m: usize,
    d: usize,
    h: ChartFn<T>,
}

impl<T: Scalar> FrontChart<T> {
    pub fn new(m: usize, d: usize, h: impl Fn(T, &mut [T]) + Send + Sync + 'static) -> Self {
        Self {
            m,
            d,
            h: Arc::new(h),
        }
    }

    /// The straight front from `(1, 0)` to `(0, 1)`, `h(r) = (1 - r, r)`.
    pub fn linear() -> Self {
        Self::new(2, 1, |r, out| {
            out[0] = T::one() - r;
            out[1] = r;
        })
    }

    pub fn n_objectives(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eval_into(&self, r: T, out: &mut [T]) {
        (self.h)(r, out)
    }

    pub fn eval(&self, r: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.m];
        self.eval_into(r, &mut out);
        out
    }

    /// Decision vector `(r, 0, ..., 0)` whose image is `h(r)`.
    pub fn edge_point(&self, r: T) -> Vec<T> {
        let mut x = vec![T::zero(); self.d];
        x[0] = r;
        x
    }
}

impl<T> fmt::Debug for FrontChart<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrontChart")
            .field("m", &self.m)
            .field("d", &self.d)
            .finish_non_exhaustive()
    }
}

/// Front chart of a problem, or an unsupported-problem error.
pub fn front_chart<T: Scalar, P: Objective<T> + ?Sized>(problem: &P) -> Result<FrontChart<T>> {
    problem.front_chart()
}

/// Maps a weight vector to the chart coordinate minimizing the Chebyshev
/// sub-problem along the optimal edge: `argmin_r max_k w_k |h_k(r)|`.
///
/// A dense grid locates the bracket, then golden-section search refines it.
#[derive(Debug, Clone)]
pub struct EdgeMinimizer<T> {
    chart: FrontChart<T>,
    grid: Vec<T>,
    images: Vec<T>,
}

impl<T: Scalar> EdgeMinimizer<T> {
    pub const DEFAULT_GRID: usize = 2001;

    pub fn new(chart: FrontChart<T>, grid_points: usize) -> Result<Self> {
        if grid_points < 3 {
            return Err(invalid("edge minimizer grid needs at least 3 points"));
        }
        let m = chart.n_objectives();
        let denom = T::from_count(grid_points - 1);
        let grid: Vec<T> = (0..grid_points).map(|i| T::from_count(i) / denom).collect();
        let mut images = vec![T::zero(); grid_points * m];
        for (r, out) in grid.iter().zip(images.chunks_exact_mut(m)) {
            chart.eval_into(*r, out);
        }
        Ok(Self {
            chart,
            grid,
            images,
        })
    }

    pub fn chart(&self) -> &FrontChart<T> {
        &self.chart
    }

    fn cost(&self, r: T, w: &[T], buf: &mut [T]) -> T {
        self.chart.eval_into(r, buf);
        chebyshev_unchecked(buf, w)
    }

    /// Optimal chart coordinate for the sub-problem with weights `w`.
    pub fn coordinate(&self, w: &[T]) -> Result<T> {
        let m = self.chart.n_objectives();
        if w.len() != m {
            return Err(invalid("weight dimension does not match the front"));
        }
        let (best, _) = self
            .images
            .chunks_exact(m)
            .map(|img| chebyshev_unchecked(img, w))
            .enumerate()
            .fold(
                (0, T::infinity()),
                |acc, (i, c)| if c < acc.1 { (i, c) } else { acc },
            );
        let mut lo = self.grid[best.saturating_sub(1)];
        let mut hi = self.grid[(best + 1).min(self.grid.len() - 1)];

        let mut buf = vec![T::zero(); m];
        let inv_phi = T::lit(0.618_033_988_749_894_8);
        let mut a = hi - inv_phi * (hi - lo);
        let mut b = lo + inv_phi * (hi - lo);
        let mut fa = self.cost(a, w, &mut buf);
        let mut fb = self.cost(b, w, &mut buf);
        for _ in 0..80 {
            if hi - lo <= T::epsilon() {
                break;
            }
            if fa <= fb {
                hi = b;
                b = a;
                fb = fa;
                a = hi - inv_phi * (hi - lo);
                fa = self.cost(a, w, &mut buf);
            } else {
                lo = a;
                a = b;
                fa = fb;
                b = lo + inv_phi * (hi - lo);
                fb = self.cost(b, w, &mut buf);
            }
        }
        let mid = (lo + hi) / T::lit(2.0);
        // Keep the grid point if refinement did not improve on it.
        let grid_r = self.grid[best];
        Ok(
            if self.cost(mid, w, &mut buf) <= self.cost(grid_r, w, &mut buf) {
                mid
            } else {
                grid_r
            },
        )
    }

    /// Minimizing decision vector `(r*, 0, ..., 0)`.
    pub fn minimizer(&self, w: &[T]) -> Result<Vec<T>> {
        Ok(self.chart.edge_point(self.coordinate(w)?))
    }

    /// Image `h(r*)` of the minimizer.
    pub fn image(&self, w: &[T]) -> Result<Vec<T>> {
        Ok(self.chart.eval(self.coordinate(w)?))
    }
}
