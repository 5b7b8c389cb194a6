//! Radially symmetric two-body potentials `U(z) = r(|z|)` and the empirical
//! interaction energy they induce on a set of image points.

use std::fmt;

use crate::error::{invalid, Result};
use crate::points::Points;
use crate::scalar::{norm, Scalar};

/// Distances below this are treated as coincident points.
pub const SINGULAR_GUARD: f64 = 1e-14;

/// Reported energies are clamped to `[-ENERGY_CAP, ENERGY_CAP]`.
pub const ENERGY_CAP: f64 = 1e10;

/// Default Morse rate.
pub const DEFAULT_MORSE_C: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind<T> {
    /// `|z|^-s`.
    Riesz { s: T },
    /// `log |z|` for `m = 2`, `|z|^(2-m)` otherwise.
    Newtonian,
    /// `exp(-C |z|)`.
    Morse { c: T },
}

/// A potential kind bound to an image dimension `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec<T> {
    pub kind: PotentialKind<T>,
    pub m: usize,
}

impl<T: Scalar> PotentialSpec<T> {
    /// Riesz potential with the default exponent `s = m - 1`.
    pub fn riesz(m: usize) -> Self {
        Self {
            kind: PotentialKind::Riesz {
                s: T::from_count(m.saturating_sub(1)),
            },
            m,
        }
    }

    pub fn riesz_with_exponent(m: usize, s: T) -> Self {
        Self {
            kind: PotentialKind::Riesz { s },
            m,
        }
    }

    pub fn newtonian(m: usize) -> Self {
        Self {
            kind: PotentialKind::Newtonian,
            m,
        }
    }

    pub fn morse(m: usize, c: T) -> Result<Self> {
        if !c.is_finite() || c <= T::zero() {
            return Err(invalid(format!("Morse rate must be positive, got {c}")));
        }
        Ok(Self {
            kind: PotentialKind::Morse { c },
            m,
        })
    }

    /// Parses `riesz`, `newtonian` or `morse`; `morse_c` is used only for Morse.
    pub fn from_name(name: &str, m: usize, morse_c: T) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "riesz" => Ok(Self::riesz(m)),
            "newtonian" | "newton" => Ok(Self::newtonian(m)),
            "morse" => Self::morse(m, morse_c),
            other => Err(invalid(format!("unknown potential '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PotentialKind::Riesz { .. } => "riesz",
            PotentialKind::Newtonian => "newtonian",
            PotentialKind::Morse { .. } => "morse",
        }
    }

    /// Radial profile `r(rho)`; the value at 0 is the limit (possibly infinite).
    pub fn radial(&self, rho: T) -> T {
        let coincident = rho < T::lit(SINGULAR_GUARD);
        match self.kind {
            PotentialKind::Riesz { s } => {
                if coincident {
                    T::infinity()
                } else if s == T::one() {
                    rho.recip()
                } else {
                    rho.powf(-s)
                }
            }
            PotentialKind::Newtonian => {
                if self.m == 2 {
                    if coincident {
                        T::neg_infinity()
                    } else {
                        rho.ln()
                    }
                } else if coincident {
                    T::infinity()
                } else {
                    rho.powi(2 - self.m as i32)
                }
            }
            PotentialKind::Morse { c } => (-c * rho).exp(),
        }
    }

    /// `r'(rho)`, with `r'(0) = 0`.
    pub fn radial_derivative(&self, rho: T) -> T {
        if rho < T::lit(SINGULAR_GUARD) {
            return T::zero();
        }
        match self.kind {
            PotentialKind::Riesz { s } => {
                if s == T::one() {
                    -(rho * rho).recip()
                } else {
                    -s * rho.powf(-s - T::one())
                }
            }
            PotentialKind::Newtonian => {
                if self.m == 2 {
                    rho.recip()
                } else {
                    (T::from_count(2) - T::from_count(self.m)) * rho.powi(1 - self.m as i32)
                }
            }
            PotentialKind::Morse { c } => -c * (-c * rho).exp(),
        }
    }

    pub fn value(&self, z: &[T]) -> T {
        self.radial(norm(z))
    }

    /// `grad U(z) = r'(|z|) z / |z|`, exactly zero at (near-)coincidence.
    pub fn gradient_into(&self, z: &[T], out: &mut [T]) {
        let rho = norm(z);
        if rho < T::lit(SINGULAR_GUARD) {
            out.iter_mut().for_each(|o| *o = T::zero());
            return;
        }
        let scale = self.radial_derivative(rho) / rho;
        for (o, &zk) in out.iter_mut().zip(z) {
            *o = scale * zk;
        }
    }

    pub fn gradient(&self, z: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); z.len()];
        self.gradient_into(z, &mut out);
        out
    }
}

impl<T: Scalar> fmt::Display for PotentialSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PotentialKind::Riesz { s } => write!(f, "riesz(s={s})"),
            PotentialKind::Newtonian => write!(f, "newtonian"),
            PotentialKind::Morse { c } => write!(f, "morse(C={c})"),
        }
    }
}

/// `(1/N^2) sum_{i != j} U(y_i - y_j)` without clamping.
pub fn energy_raw<T: Scalar>(spec: &PotentialSpec<T>, points: &Points<T>) -> T {
    let n = points.len();
    let mut sum = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let rho = crate::scalar::dist_sq(points.row(i), points.row(j)).sqrt();
            sum = sum + spec.radial(rho);
        }
    }
    let n = T::from_count(n.max(1));
    T::lit(2.0) * sum / (n * n)
}

/// Interaction energy clamped to `[-1e10, 1e10]`.
pub fn energy<T: Scalar>(spec: &PotentialSpec<T>, points: &Points<T>) -> T {
    clamp_energy(energy_raw(spec, points))
}

pub fn clamp_energy<T: Scalar>(e: T) -> T {
    let cap = T::lit(ENERGY_CAP);
    if e.is_nan() {
        return e;
    }
    e.max(-cap).min(cap)
}

/// Riesz, Newtonian and Morse energies of one point set in a single pass
/// over the pairs. Returned raw (unclamped).
pub fn energies_raw<T: Scalar>(
    riesz: &PotentialSpec<T>,
    newtonian: &PotentialSpec<T>,
    morse: &PotentialSpec<T>,
    points: &Points<T>,
) -> [T; 3] {
    let n = points.len();
    let mut sums = [T::zero(); 3];
    for i in 0..n {
        for j in (i + 1)..n {
            let rho = crate::scalar::dist_sq(points.row(i), points.row(j)).sqrt();
            sums[0] = sums[0] + riesz.radial(rho);
            sums[1] = sums[1] + newtonian.radial(rho);
            sums[2] = sums[2] + morse.radial(rho);
        }
    }
    let nf = T::from_count(n.max(1));
    let scale = T::lit(2.0) / (nf * nf);
    sums.map(|s| s * scale)
}
