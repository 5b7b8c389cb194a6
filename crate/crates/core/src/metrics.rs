//! Solution-quality metrics: generational distances, bi-objective hypervolume,
//! interaction energies and the mean-field l2 error.

use crate::dynamics::SwarmView;
use crate::error::{invalid, Error, Result};
use crate::objectives::{dist_to_box, EdgeMinimizer};
use crate::points::Points;
use crate::potentials::{clamp_energy, energies_raw, PotentialSpec, DEFAULT_MORSE_C};
use crate::scalar::{dist_sq, Scalar};
use crate::simplex::WeightVector;

/// Default number of reference points.
pub const DEFAULT_REFERENCE_SIZE: usize = 100;

/// A finite point approximation of the Pareto front.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFront<T> {
    points: Points<T>,
}

impl<T: Scalar> ReferenceFront<T> {
    pub fn new(points: Points<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("reference front needs at least one point"));
        }
        if !points.all_finite() {
            return Err(invalid("reference front has non-finite points"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &Points<T> {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Componentwise maximum plus 10% of the componentwise range.
    pub fn default_reference_point(&self) -> Vec<T> {
        let m = self.points.dim();
        let mut lo = vec![T::infinity(); m];
        let mut hi = vec![T::neg_infinity(); m];
        for p in self.points.rows() {
            for k in 0..m {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        hi.iter()
            .zip(&lo)
            .map(|(&h, &l)| h + T::lit(0.1) * (h - l))
            .collect()
    }
}

fn nearest_sq<T: Scalar>(p: &[T], set: &Points<T>) -> T {
    set.rows()
        .map(|q| dist_sq(p, q))
        .fold(T::infinity(), T::min)
}

fn rms_distance<T: Scalar>(from: &Points<T>, to: &Points<T>) -> Result<T> {
    if from.is_empty() || to.is_empty() {
        return Err(invalid("distance metric over an empty point set"));
    }
    if from.dim() != to.dim() {
        return Err(invalid("point sets differ in dimension"));
    }
    let total = from
        .rows()
        .map(|p| nearest_sq(p, to))
        .fold(T::zero(), |a, b| a + b);
    Ok((total / T::from_count(from.len())).sqrt())
}

/// Generational distance: RMS distance from each image to the front.
pub fn gd<T: Scalar>(images: &Points<T>, front: &ReferenceFront<T>) -> Result<T> {
    rms_distance(images, &front.points)
}

/// Inverted generational distance: RMS distance from each reference point to
/// the nearest image.
pub fn igd<T: Scalar>(images: &Points<T>, front: &ReferenceFront<T>) -> Result<T> {
    rms_distance(&front.points, images)
}

/// Area dominated by `images` and bounded by `gstar`.
///
/// Points that are not strictly below `gstar` in both coordinates contribute
/// nothing. The remaining points are swept in order of their first coordinate.
pub fn hypervolume_2d<T: Scalar>(images: &Points<T>, gstar: &[T]) -> Result<T> {
    if images.dim() != 2 || gstar.len() != 2 {
        return Err(invalid("hypervolume_2d needs bi-objective points"));
    }
    let mut pts: Vec<[T; 2]> = images
        .rows()
        .filter(|p| p[0] < gstar[0] && p[1] < gstar[1])
        .map(|p| [p[0], p[1]])
        .collect();
    if pts.iter().any(|p| p.iter().any(|v| v.is_nan())) {
        return Err(invalid("NaN image point"));
    }
    pts.sort_unstable_by(|a, b| {
        a[0].partial_cmp(&b[0])
            .expect("not NaN")
            .then(a[1].partial_cmp(&b[1]).expect("not NaN"))
    });
    let mut area = T::zero();
    let mut ceiling = gstar[1];
    for p in pts {
        if p[1] < ceiling {
            area = area + (gstar[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    Ok(area)
}

/// Empirical mean-field error `(1/N) sum_i |X^i - xbar(W^i)|^2`.
pub fn mean_field_error<T, F>(
    positions: &Points<T>,
    weights: &[WeightVector<T>],
    mut minimizer: F,
) -> Result<T>
where
    T: Scalar,
    F: FnMut(&WeightVector<T>) -> Result<Vec<T>>,
{
    if positions.is_empty() || positions.len() != weights.len() {
        return Err(invalid("positions and weights differ in count"));
    }
    let mut total = T::zero();
    for (x, w) in positions.rows().zip(weights) {
        let target = minimizer(w)?;
        if target.len() != x.len() {
            return Err(Error::Unsupported(
                "minimizer map returned a point of the wrong dimension".into(),
            ));
        }
        total = total + dist_sq(x, &target);
    }
    Ok(total / T::from_count(positions.len()))
}

/// Fraction of particles outside `[0, 1]^d`.
pub fn out_of_box_fraction<T: Scalar>(positions: &Points<T>) -> T {
    if positions.is_empty() {
        return T::zero();
    }
    let outside = positions
        .rows()
        .filter(|x| dist_to_box(x) > T::zero())
        .count();
    T::from_count(outside) / T::from_count(positions.len())
}

/// One row of the metrics history.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord<T> {
    pub iteration: usize,
    pub gd: T,
    pub igd: T,
    pub hypervolume: T,
    pub u_riesz: T,
    pub u_newton: T,
    pub u_morse: T,
    pub mean_field_error: Option<T>,
    pub out_of_box: T,
}

impl<T: Scalar> MetricsRecord<T> {
    pub const CSV_HEADER: &'static str = "k,gd,igd,hv,u_riesz,u_newton,u_morse,mf_err,oob_frac";

    /// CSV row matching [`Self::CSV_HEADER`]; a missing mean-field error is an
    /// empty cell.
    pub fn to_csv_row(&self) -> String {
        let mf = self
            .mean_field_error
            .map(|v| format!("{v:e}"))
            .unwrap_or_default();
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
            self.iteration,
            self.gd,
            self.igd,
            self.hypervolume,
            self.u_riesz,
            self.u_newton,
            self.u_morse,
            mf,
            self.out_of_box
        )
    }

    /// Parses a row written by [`Self::to_csv_row`].
    pub fn from_csv_row(line: &str) -> Result<Self> {
        let cells: Vec<&str> = line.trim().split(',').collect();
        if cells.len() != 9 {
            return Err(invalid(format!(
                "expected 9 metric columns, got {}",
                cells.len()
            )));
        }
        let num = |s: &str| -> Result<T> {
            s.parse::<f64>()
                .map(T::lit)
                .map_err(|e| invalid(format!("bad metric value '{s}': {e}")))
        };
        Ok(Self {
            iteration: cells[0]
                .parse()
                .map_err(|e| invalid(format!("bad iteration '{}': {e}", cells[0])))?,
            gd: num(cells[1])?,
            igd: num(cells[2])?,
            hypervolume: num(cells[3])?,
            u_riesz: num(cells[4])?,
            u_newton: num(cells[5])?,
            u_morse: num(cells[6])?,
            mean_field_error: if cells[7].is_empty() {
                None
            } else {
                Some(num(cells[7])?)
            },
            out_of_box: num(cells[8])?,
        })
    }
}

/// Computes [`MetricsRecord`]s against a fixed reference front.
#[derive(Debug, Clone)]
pub struct MetricsEvaluator<T> {
    reference: ReferenceFront<T>,
    gstar: Vec<T>,
    riesz: PotentialSpec<T>,
    newton: PotentialSpec<T>,
    morse: PotentialSpec<T>,
    minimizer: Option<EdgeMinimizer<T>>,
}

impl<T: Scalar> MetricsEvaluator<T> {
    /// Uses the default hypervolume reference point unless `gstar` is given.
    pub fn new(reference: ReferenceFront<T>, gstar: Option<Vec<T>>) -> Result<Self> {
        let m = reference.points().dim();
        let gstar = gstar.unwrap_or_else(|| reference.default_reference_point());
        if gstar.len() != m {
            return Err(invalid(
                "hypervolume reference point has the wrong dimension",
            ));
        }
        Ok(Self {
            riesz: PotentialSpec::riesz(m),
            newton: PotentialSpec::newtonian(m),
            morse: PotentialSpec::morse(m, T::lit(DEFAULT_MORSE_C))?,
            reference,
            gstar,
            minimizer: None,
        })
    }

    /// Enables the mean-field error column.
    pub fn with_minimizer(mut self, minimizer: EdgeMinimizer<T>) -> Self {
        self.minimizer = Some(minimizer);
        self
    }

    pub fn reference(&self) -> &ReferenceFront<T> {
        &self.reference
    }

    pub fn reference_point(&self) -> &[T] {
        &self.gstar
    }

    pub fn record(&self, view: &SwarmView<'_, T>) -> Result<MetricsRecord<T>> {
        let images = view.images;
        let [u_r, u_n, u_m] = energies_raw(&self.riesz, &self.newton, &self.morse, images);
        let hypervolume = if images.dim() == 2 {
            hypervolume_2d(images, &self.gstar)?
        } else {
            T::nan()
        };
        let mean_field_error = match &self.minimizer {
            Some(map) => Some(mean_field_error(view.positions, view.weights, |w| {
                map.minimizer(w)
            })?),
            None => None,
        };
        Ok(MetricsRecord {
            iteration: view.iteration,
            gd: gd(images, &self.reference)?,
            igd: igd(images, &self.reference)?,
            hypervolume,
            u_riesz: clamp_energy(u_r),
            u_newton: clamp_energy(u_n),
            u_morse: clamp_energy(u_m),
            mean_field_error,
            out_of_box: out_of_box_fraction(view.positions),
        })
    }
}
