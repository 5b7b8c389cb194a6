//! Weighted Chebyshev scalarization and the softmax consensus point.

use crate::error::{invalid, Result};
use crate::points::Points;
use crate::scalar::Scalar;
use crate::simplex::WeightVector;

/// `max_k w_k |g_k|`.
pub fn chebyshev<T: Scalar>(gvals: &[T], w: &WeightVector<T>) -> Result<T> {
    if gvals.len() != w.dim() {
        return Err(invalid(format!(
            "objective dimension {} does not match weight dimension {}",
            gvals.len(),
            w.dim()
        )));
    }
    Ok(chebyshev_unchecked(gvals, w))
}

/// [`chebyshev`] without the dimension check; `w` may be any slice.
#[inline]
pub fn chebyshev_unchecked<T: Scalar>(gvals: &[T], w: &[T]) -> T {
    gvals
        .iter()
        .zip(w)
        .fold(T::zero(), |acc, (&g, &wk)| acc.max(wk * g.abs()))
}

/// Reusable buffers for repeated consensus-point evaluation.
#[derive(Debug, Clone, Default)]
pub struct ConsensusScratch<T> {
    scores: Vec<T>,
}

/// Softmax-weighted mean of the batch positions with Gibbs weights
/// `exp(-alpha G(X_j, w))`.
///
/// Exponents are shifted by the batch minimum of `G`, so the result is finite
/// for any `alpha` and always lies in the convex hull of the batch.
pub fn consensus_point<T: Scalar>(
    positions: &Points<T>,
    gvalues: &Points<T>,
    w: &WeightVector<T>,
    alpha: T,
    batch: &[usize],
) -> Result<Vec<T>> {
    if gvalues.dim() != w.dim() {
        return Err(invalid(
            "objective dimension does not match weight dimension",
        ));
    }
    if positions.len() != gvalues.len() {
        return Err(invalid("positions and objective values differ in count"));
    }
    if !alpha.is_finite() || alpha < T::zero() {
        return Err(invalid(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    if let Some(&bad) = batch.iter().find(|&&j| j >= positions.len()) {
        return Err(invalid(format!("batch index {bad} out of range")));
    }
    let mut out = vec![T::zero(); positions.dim()];
    let mut scratch = ConsensusScratch::default();
    consensus_point_into(positions, gvalues, w, alpha, batch, &mut scratch, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`consensus_point`]; indices are not range checked.
pub fn consensus_point_into<T: Scalar>(
    positions: &Points<T>,
    gvalues: &Points<T>,
    w: &[T],
    alpha: T,
    batch: &[usize],
    scratch: &mut ConsensusScratch<T>,
    out: &mut [T],
) -> Result<()> {
    if batch.is_empty() {
        return Err(invalid("consensus point over an empty batch"));
    }
    scratch.scores.clear();
    scratch.scores.extend(
        batch
            .iter()
            .map(|&j| chebyshev_unchecked(gvalues.row(j), w)),
    );
    consensus_from_scores(positions, &scratch.scores, alpha, batch, out);
    Ok(())
}

/// Consensus point from precomputed scores `scores[b] = G(X_{batch[b]}, w)`.
pub fn consensus_from_scores<T: Scalar>(
    positions: &Points<T>,
    scores: &[T],
    alpha: T,
    batch: &[usize],
    out: &mut [T],
) {
    debug_assert_eq!(scores.len(), batch.len());
    let g_min = scores.iter().copied().fold(T::infinity(), T::min);
    let cutoff = T::exp_underflow();
    out.iter_mut().for_each(|o| *o = T::zero());
    let mut total = T::zero();
    for (&j, &score) in batch.iter().zip(scores) {
        let exponent = -(alpha * (score - g_min));
        // exp flushes to exactly zero below the cutoff; skipping is lossless.
        if exponent < cutoff {
            continue;
        }
        let weight = exponent.exp();
        total = total + weight;
        for (o, &x) in out.iter_mut().zip(positions.row(j)) {
            *o = *o + weight * x;
        }
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}
