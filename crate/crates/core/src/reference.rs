//! Low-energy reference fronts.
//!
//! `M` points are moved along a known front chart `h` by the tangential part
//! of the repulsive interaction field, integrated in chart coordinates with
//! explicit Euler. A second flow runs the same interaction directly on
//! simplex weights, mapped to the front through the Chebyshev minimizer.

use crate::error::{invalid, Error, Result};
use crate::metrics::ReferenceFront;
use crate::objectives::{EdgeMinimizer, FrontChart, Objective};
use crate::points::Points;
use crate::potentials::PotentialSpec;
use crate::scalar::Scalar;
use crate::simplex::{project_simplex, WeightVector};

/// Step used for chart derivatives.
pub const CHART_FD_STEP: f64 = 1e-7;

/// Below this norm the chart derivative is considered degenerate.
pub const CHART_DEGENERATE: f64 = 1e-12;

/// Time stepping of a front flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl<T> {
    /// `horizon / dt` steps of size `dt`.
    Fixed,
    /// Step size re-estimated every step from the closest pair; runs until the
    /// fastest image moves slower than `tolerance` times its initial speed,
    /// or `max_steps` is reached. `dt` and `horizon` are ignored.
    Adaptive { tolerance: T, max_steps: usize },
}

#[derive(Debug, Clone)]
pub struct FrontFlowConfig<T> {
    pub n_points: usize,
    pub potential: PotentialSpec<T>,
    pub dt: T,
    pub horizon: T,
    pub chart: FrontChart<T>,
    /// Store the state every this many steps (0 stores only start and end).
    pub record_every: usize,
    pub step: StepControl<T>,
}

impl<T: Scalar> FrontFlowConfig<T> {
    /// `dt = 1e-8`, `T = 0.01`.
    pub fn new(chart: FrontChart<T>, n_points: usize, potential: PotentialSpec<T>) -> Self {
        Self {
            n_points,
            potential,
            dt: T::lit(1e-8),
            horizon: T::lit(0.01),
            chart,
            record_every: 0,
            step: StepControl::Fixed,
        }
    }

    /// Settings used by [`generate_reference`]: adaptive steps until the
    /// configuration is stationary.
    pub fn for_reference(
        chart: FrontChart<T>,
        n_points: usize,
        potential: PotentialSpec<T>,
    ) -> Self {
        Self {
            step: StepControl::Adaptive {
                tolerance: T::lit(REFERENCE_TOLERANCE),
                max_steps: REFERENCE_MAX_STEPS,
            },
            ..Self::new(chart, n_points, potential)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(invalid("front flow needs at least one point"));
        }
        if self.dt.is_nan()
            || self.dt <= T::zero()
            || self.horizon.is_nan()
            || self.horizon <= T::zero()
        {
            return Err(invalid("front flow needs dt > 0 and T > 0"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round().to_usize().unwrap_or(0)
    }
}

pub const REFERENCE_TOLERANCE: f64 = 1e-5;
pub const REFERENCE_MAX_STEPS: usize = 200_000;

/// Final state plus the recorded states of a flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult<S> {
    pub final_state: S,
    /// `(step, state)` pairs, always including step 0 and the last step.
    pub trajectory: Vec<(usize, S)>,
}

/// `h'(r)` by central differences (one-sided within one step of an endpoint).
pub fn chart_jacobian<T: Scalar>(chart: &FrontChart<T>, r: T) -> Result<Vec<T>> {
    let m = chart.n_objectives();
    let mut plus = vec![T::zero(); m];
    let mut minus = vec![T::zero(); m];
    chart_jacobian_into(chart, r, &mut plus, &mut minus)?;
    Ok(plus)
}

/// Writes `h'(r)` into `out`; `tmp` is scratch of the same length.
fn chart_jacobian_into<T: Scalar>(
    chart: &FrontChart<T>,
    r: T,
    out: &mut [T],
    tmp: &mut [T],
) -> Result<()> {
    let h = T::lit(CHART_FD_STEP);
    let (lo, hi) = if r - h < T::zero() {
        (r, r + h)
    } else if r + h > T::one() {
        (r - h, r)
    } else {
        (r - h, r + h)
    };
    chart.eval_into(hi, out);
    chart.eval_into(lo, tmp);
    let width = hi - lo;
    for (o, &t) in out.iter_mut().zip(tmp.iter()) {
        *o = (*o - t) / width;
    }
    let norm = crate::scalar::norm(out);
    if norm.is_nan() || norm < T::lit(CHART_DEGENERATE) {
        return Err(Error::DegenerateChart {
            r: r.as_f64(),
            norm: norm.as_f64(),
        });
    }
    Ok(())
}

/// `F_i = -(1/M) sum_j grad U(G_i - G_j)` for every point. Returns the
/// smallest pair distance.
fn interaction_forces<T: Scalar>(
    potential: &PotentialSpec<T>,
    images: &Points<T>,
    forces: &mut Points<T>,
) -> T {
    let n = images.len();
    let m = images.dim();
    let scale = -T::from_count(n).recip();
    let mut closest = T::infinity();
    let mut z = vec![T::zero(); m];
    let mut grad = vec![T::zero(); m];
    for i in 0..n {
        let gi = images.row(i);
        let f = forces.row_mut(i);
        f.iter_mut().for_each(|v| *v = T::zero());
        for j in 0..n {
            if i == j {
                continue;
            }
            for ((zk, &a), &b) in z.iter_mut().zip(gi).zip(images.row(j)) {
                *zk = a - b;
            }
            closest = closest.min(crate::scalar::norm(&z));
            potential.gradient_into(&z, &mut grad);
            for (fk, &gk) in f.iter_mut().zip(&grad) {
                *fk = *fk + gk;
            }
        }
        f.iter_mut().for_each(|v| *v = *v * scale);
    }
    closest
}

/// Step size keeping explicit Euler stable for the closest pair and moving no
/// image by more than a tenth of the closest distance.
fn adaptive_dt<T: Scalar>(potential: &PotentialSpec<T>, n: usize, closest: T, max_speed: T) -> T {
    let rho = closest.max(T::lit(crate::potentials::SINGULAR_GUARD));
    let h = rho * T::lit(1e-6);
    let curvature = ((potential.radial_derivative(rho + h) - potential.radial_derivative(rho - h))
        / (h + h))
        .abs();
    let transverse = (potential.radial_derivative(rho) / rho).abs();
    let stiffness = T::lit(5.0) / T::from_count(n) * curvature.max(transverse);
    let mut dt = T::lit(0.5) / stiffness;
    if max_speed > T::zero() {
        dt = dt.min(T::lit(0.1) * rho / max_speed);
    }
    dt
}

/// Explicit Euler on `dZ_i/dt = h'(Z_i)^+ P_T (F_i)` in chart coordinates.
///
/// The projected force along `h'` followed by the pseudo-inverse reduces to
/// `(h' . F) / |h'|^2`. Coordinates are clamped to `[0, 1]`; at a degenerate
/// chart point the velocity is zero.
pub fn flow_on_front<T: Scalar>(
    config: &FrontFlowConfig<T>,
    initial: &[T],
) -> Result<FlowResult<Vec<T>>> {
    config.validate()?;
    if initial.len() != config.n_points {
        return Err(invalid("initial coordinates do not match the point count"));
    }
    if initial.iter().any(|&z| !(z >= T::zero() && z <= T::one())) {
        return Err(invalid("initial coordinates must lie in [0, 1]"));
    }
    let n = config.n_points;
    let m = config.chart.n_objectives();
    let (max_steps, tolerance) = match config.step {
        StepControl::Fixed => (config.steps(), None),
        StepControl::Adaptive {
            tolerance,
            max_steps,
        } => (max_steps, Some(tolerance)),
    };
    let mut coords = initial.to_vec();
    let mut images = Points::zeros(n, m);
    let mut forces = Points::zeros(n, m);
    let mut jac = vec![T::zero(); m];
    let mut tmp = vec![T::zero(); m];
    let mut velocity = vec![T::zero(); n];
    let mut tangent_norm = vec![T::zero(); n];
    let mut trajectory = vec![(0, coords.clone())];
    let mut reference_speed: Option<T> = None;

    let mut step = 0;
    while step < max_steps && n > 1 {
        step += 1;
        for (z, g) in coords.iter().zip(images.rows_mut()) {
            config.chart.eval_into(*z, g);
        }
        let closest = interaction_forces(&config.potential, &images, &mut forces);
        let mut max_speed = T::zero();
        for i in 0..n {
            let (v, t) = match chart_jacobian_into(&config.chart, coords[i], &mut jac, &mut tmp) {
                Ok(()) => {
                    let dot = jac
                        .iter()
                        .zip(forces.row(i))
                        .fold(T::zero(), |a, (&j, &f)| a + j * f);
                    let nsq = jac.iter().fold(T::zero(), |a, &j| a + j * j);
                    (dot / nsq, nsq.sqrt())
                }
                Err(Error::DegenerateChart { .. }) => (T::zero(), T::zero()),
                Err(e) => return Err(e),
            };
            velocity[i] = v;
            tangent_norm[i] = t;
            max_speed = max_speed.max((v * t).abs());
        }
        let dt = match tolerance {
            None => config.dt,
            Some(_) => adaptive_dt(&config.potential, n, closest, max_speed),
        };
        let mut moved = T::zero();
        for (i, z) in coords.iter_mut().enumerate() {
            let next = *z + dt * velocity[i];
            if !next.is_finite() {
                return Err(Error::NumericalBlowup {
                    iteration: step,
                    particle: i,
                });
            }
            let next = next.max(T::zero()).min(T::one());
            moved = moved.max((next - *z).abs() * tangent_norm[i] / dt);
            *z = next;
        }
        let converged = match tolerance {
            Some(tol) => {
                let reference = *reference_speed.get_or_insert(max_speed);
                moved.is_nan() || moved <= tol * reference
            }
            None => false,
        };
        if converged
            || step == max_steps
            || (config.record_every > 0 && step % config.record_every == 0)
        {
            trajectory.push((step, coords.clone()));
        }
        if converged {
            break;
        }
    }
    if trajectory.last().map(|(s, _)| *s) != Some(step) {
        trajectory.push((step, coords.clone()));
    }
    Ok(FlowResult {
        final_state: coords,
        trajectory,
    })
}

/// Explicit Euler on the weights, `W_i <- Proj(W_i + dt F_i)`, with `G_i`
/// the image of the Chebyshev minimizer for `W_i` on the chart.
pub fn flow_in_simplex<T: Scalar>(
    config: &FrontFlowConfig<T>,
    initial: &[WeightVector<T>],
) -> Result<FlowResult<Vec<WeightVector<T>>>> {
    config.validate()?;
    if config.chart.n_objectives() != 2 {
        return Err(invalid(
            "the simplex flow is defined for bi-objective fronts",
        ));
    }
    if initial.len() != config.n_points {
        return Err(invalid("initial weights do not match the point count"));
    }
    let map = EdgeMinimizer::new(config.chart.clone(), EdgeMinimizer::<T>::DEFAULT_GRID)?;
    let n = config.n_points;
    let steps = config.steps();
    let mut weights = initial.to_vec();
    let mut images = Points::zeros(n, 2);
    let mut forces = Points::zeros(n, 2);
    let mut trajectory = vec![(0, weights.clone())];

    for step in 1..=steps {
        if n > 1 {
            for (w, g) in weights.iter().zip(images.rows_mut()) {
                g.copy_from_slice(&map.image(w)?);
            }
            interaction_forces(&config.potential, &images, &mut forces);
            let mut next = Vec::with_capacity(n);
            for (i, w) in weights.iter().enumerate() {
                let f = forces.row(i);
                // The sign follows the weight-space orientation of the front:
                // grad U itself, not -grad U, moves W.
                let v = [w[0] - config.dt * f[0], w[1] - config.dt * f[1]];
                next.push(project_simplex(&v).map_err(|_| Error::NumericalBlowup {
                    iteration: step,
                    particle: i,
                })?);
            }
            weights = next;
        }
        if step == steps || (config.record_every > 0 && step % config.record_every == 0) {
            trajectory.push((step, weights.clone()));
        }
    }
    Ok(FlowResult {
        final_state: weights,
        trajectory,
    })
}

/// Equispaced chart coordinates `(i-1)/(M-1)`; `0.5` for a single point.
pub fn equispaced_coordinates<T: Scalar>(n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::lit(0.5)];
    }
    let denom = T::from_count(n - 1);
    (0..n).map(|i| T::from_count(i) / denom).collect()
}

/// Images `h(z)` of chart coordinates.
pub fn chart_images<T: Scalar>(chart: &FrontChart<T>, coords: &[T]) -> Points<T> {
    let mut out = Points::zeros(coords.len(), chart.n_objectives());
    for (z, g) in coords.iter().zip(out.rows_mut()) {
        chart.eval_into(*z, g);
    }
    out
}

/// Low-energy `M`-point reference front for a problem with a known chart.
pub fn generate_reference<T: Scalar, P: Objective<T> + ?Sized>(
    problem: &P,
    n_points: usize,
    potential: PotentialSpec<T>,
) -> Result<ReferenceFront<T>> {
    let chart = problem.front_chart()?;
    reference_from_chart(FrontFlowConfig::for_reference(chart, n_points, potential))
}

/// Runs [`flow_on_front`] from equispaced coordinates and maps the result
/// through the chart.
pub fn reference_from_chart<T: Scalar>(config: FrontFlowConfig<T>) -> Result<ReferenceFront<T>> {
    let start = equispaced_coordinates(config.n_points);
    let flow = flow_on_front(&config, &start)?;
    ReferenceFront::new(chart_images(&config.chart, &flow.final_state))
}
