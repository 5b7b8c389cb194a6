//! Geometry of the probability simplex: weight vectors, Euclidean projection
//! and initial weight placement.

use std::ops::Deref;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Tolerance on `sum(w) == 1` for a vector to count as a simplex point.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A point of the probability simplex: non-negative, summing to one.
///
/// Each weight vector parametrizes one Chebyshev sub-problem.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T>(Vec<T>);

impl<T: Scalar> WeightVector<T> {
    /// Wraps `w` after checking the simplex invariants.
    pub fn new(w: Vec<T>) -> Result<Self> {
        if !is_in_simplex(&w) {
            return Err(invalid(format!("{w:?} is not a point of the simplex")));
        }
        Ok(Self(w))
    }

    /// The barycenter `(1/m, ..., 1/m)`.
    pub fn barycenter(m: usize) -> Self {
        Self(vec![T::one() / T::from_count(m); m])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for WeightVector<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// Membership test within [`SUM_TOLERANCE`].
pub fn is_in_simplex<T: Scalar>(w: &[T]) -> bool {
    if w.is_empty() || w.iter().any(|&x| !x.is_finite() || x < T::zero()) {
        return false;
    }
    let sum = w.iter().fold(T::zero(), |a, &b| a + b);
    (sum - T::one()).abs() <= T::lit(SUM_TOLERANCE)
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
///
/// Points already in the simplex are returned unchanged, which makes the
/// projection exactly idempotent.
pub fn project_simplex<T: Scalar>(v: &[T]) -> Result<WeightVector<T>> {
    if v.len() < 2 {
        return Err(invalid("simplex projection needs at least two components"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("non-finite component in {v:?}")));
    }
    if is_in_simplex(v) {
        return Ok(WeightVector(v.to_vec()));
    }

    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumulative = T::zero();
    let mut theta = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cumulative = cumulative + u;
        let candidate = (cumulative - T::one()) / T::from_count(j + 1);
        if u - candidate > T::zero() {
            theta = candidate;
        } else {
            break;
        }
    }

    let mut w: Vec<T> = v.iter().map(|&x| (x - theta).max(T::zero())).collect();
    let sum = w.iter().fold(T::zero(), |a, &b| a + b);
    // Rounding drift in the threshold step.
    for x in &mut w {
        *x = *x / sum;
    }
    Ok(WeightVector(w))
}

/// Initial weights spread uniformly over the simplex.
///
/// For `m == 2` the deterministic grid `((i-1)/(N-1), (N-i)/(N-1))` is used
/// (the barycenter when `N == 1`) and `rng` is not touched. For `m > 2` the
/// weights are independent flat-Dirichlet draws.
pub fn uniform_weights<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<Vec<WeightVector<T>>> {
    if n == 0 {
        return Err(invalid("need at least one weight vector"));
    }
    if m < 2 {
        return Err(invalid("the weight simplex needs dimension m >= 2"));
    }
    if m == 2 {
        if n == 1 {
            return Ok(vec![WeightVector::barycenter(2)]);
        }
        let denom = T::from_count(n - 1);
        return Ok((0..n)
            .map(|i| {
                WeightVector(vec![
                    T::from_count(i) / denom,
                    T::from_count(n - 1 - i) / denom,
                ])
            })
            .collect());
    }
    Ok((0..n).map(|_| dirichlet_flat(m, rng)).collect())
}

fn dirichlet_flat<T: Scalar, R: Rng + ?Sized>(m: usize, rng: &mut R) -> WeightVector<T> {
    loop {
        let draws: Vec<T> = (0..m).map(|_| T::standard_exp(rng)).collect();
        let sum = draws.iter().fold(T::zero(), |a, &b| a + b);
        if sum > T::zero() {
            return WeightVector(draws.into_iter().map(|x| x / sum).collect());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Nearest point of a dense grid of the simplex (m = 2 or 3).
    fn grid_oracle(v: &[f64], res: usize) -> (Vec<f64>, f64) {
        let mut best = (vec![], f64::INFINITY);
        let h = 1.0 / res as f64;
        let mut consider = |w: Vec<f64>| {
            let d: f64 = w.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.1 {
                best = (w, d);
            }
        };
        match v.len() {
            2 => (0..=res).for_each(|i| consider(vec![i as f64 * h, 1.0 - i as f64 * h])),
            3 => {
                for i in 0..=res {
                    for j in 0..=res - i {
                        let (a, b) = (i as f64 * h, j as f64 * h);
                        consider(vec![a, b, (1.0 - a - b).max(0.0)]);
                    }
                }
            }
            _ => unreachable!(),
        }
        (best.0, best.1.sqrt())
    }

    #[test]
    fn projection_examples() {
        let p = project_simplex(&[0.3, 0.7]).unwrap();
        assert_eq!(p.as_slice(), &[0.3, 0.7]);

        let p = project_simplex(&[2.0, -1.0]).unwrap();
        let (oracle, _) = grid_oracle(&[2.0, -1.0], 10_000);
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
        assert!((p[0] - oracle[0]).abs() <= 1e-4);

        let p = project_simplex(&[0.5_f64, 0.5, 0.5]).unwrap();
        for &x in p.iter() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_rejects_bad_input() {
        assert!(project_simplex(&[f64::NAN, 0.0]).is_err());
        assert!(project_simplex(&[f64::INFINITY, 0.0]).is_err());
        assert!(project_simplex(&[1.0_f64]).is_err());
    }

    #[test]
    fn uniform_weights_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = uniform_weights::<f64, _>(3, 2, &mut rng).unwrap();
        let w: Vec<_> = w.iter().map(|w| w.to_vec()).collect();
        assert_eq!(w, vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);

        let w = uniform_weights::<f64, _>(1, 2, &mut rng).unwrap();
        assert_eq!(w[0].as_slice(), &[0.5, 0.5]);

        assert!(uniform_weights::<f64, _>(0, 2, &mut rng).is_err());
    }

    #[test]
    fn uniform_weights_grid_is_swap_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n in [2usize, 7, 100, 333] {
            let w = uniform_weights::<f64, _>(n, 2, &mut rng).unwrap();
            for i in 0..n {
                let mirror = &w[n - 1 - i];
                assert_eq!(w[i][0], mirror[1]);
                assert_eq!(w[i][1], mirror[0]);
                assert!(is_in_simplex(&w[i]));
            }
        }
    }

    #[test]
    fn dirichlet_means_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = uniform_weights::<f64, _>(1000, 3, &mut rng).unwrap();
        for k in 0..3 {
            let mean = w.iter().map(|w| w[k]).sum::<f64>() / 1000.0;
            assert!((mean - 1.0 / 3.0).abs() < 0.03, "component {k}: {mean}");
        }
        assert!(w.iter().all(|w| is_in_simplex(w)));
    }

    #[test]
    fn f32_projection() {
        let p = project_simplex(&[0.9_f32, 0.9, -3.0]).unwrap();
        assert!(is_in_simplex(&p));
        assert!((p[0] - 0.5).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(v in prop::collection::vec(-5.0f64..5.0, 2..8)) {
            let p = project_simplex(&v).unwrap();
            prop_assert!(is_in_simplex(&p));
            let q = project_simplex(&p).unwrap();
            prop_assert_eq!(p, q);
        }

        #[test]
        fn projection_beats_grid(v in prop::collection::vec(-2.0f64..2.0, 2..=3)) {
            let p = project_simplex(&v).unwrap();
            let d_proj: f64 = p.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let (_, d_grid) = grid_oracle(&v, 200);
            prop_assert!(d_proj <= d_grid + 1e-12);
        }
    }
}
