//! Error metrics against a set of reference entries.

use crate::error::{Error, Result};
use crate::linalg::{project_observed, FactorPair, SparseObservations};

/// `Σ (ref − P)² / Σ ref²` over the reference entries.
pub fn nmse_on(pair: &FactorPair, reference: &SparseObservations) -> Result<f64> {
    let pred = project_observed(pair, reference)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, r) in pred.iter().zip(reference.values()) {
        num += (r - p) * (r - p);
        den += r * r;
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

/// Root mean squared error, with predictions clamped to `clip` if given.
pub fn rmse_on(
    pair: &FactorPair,
    reference: &SparseObservations,
    clip: Option<(f64, f64)>,
) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let pred = project_observed(pair, reference)?;
    let sum: f64 = pred
        .iter()
        .zip(reference.values())
        .map(|(&p, r)| {
            let p = match clip {
                Some((lo, hi)) => p.clamp(lo, hi),
                None => p,
            };
            (r - p) * (r - p)
        })
        .sum();
    Ok((sum / reference.len() as f64).sqrt())
}
