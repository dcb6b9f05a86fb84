//! Dominant singular triplet by power iteration on `GᵀG`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dense::{dot, norm2};
use super::operator::LinearOperator;
use crate::error::{Error, Result};

/// Iteration cap used by the solvers unless configured otherwise.
pub const DEFAULT_MAX_ITERS: usize = 200;
/// Residual tolerance used by the solvers unless configured otherwise.
pub const DEFAULT_TOL: f64 = 1e-9;

/// `(σ, u, v)` with `G·v = σ·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriplet {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl SingularTriplet {
    fn zero(m: usize, n: usize) -> Self {
        let mut u = vec![0.0; m];
        let mut v = vec![0.0; n];
        u[0] = 1.0;
        v[0] = 1.0;
        Self { sigma: 0.0, u, v }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerOutcome {
    pub triplet: SingularTriplet,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }
}

/// SplitMix64 finalizer; combines a base seed with an iteration index.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Power iteration for the dominant singular triplet of `op`.
///
/// The start vector is standard normal from a ChaCha8 stream seeded with
/// `seed`. Each step forms `u = Gv/‖Gv‖`, `w = Gᵀu` and stops once
/// `‖w − ‖Gv‖·v‖ ≤ tol·‖w‖`. That residual equals
/// `sqrt(1 − (σ_prev/σ_next)²)` for the two successive σ estimates, so it
/// bounds the singular-vector error to first order. The returned `u` is
/// recomputed from the final `v`, so `G·v = σ·u` holds to rounding.
///
/// A zero operator returns `σ = 0` with `u = e₁`, `v = e₁`.
pub fn top_singular_triplet(
    op: &dyn LinearOperator,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<PowerOutcome> {
    let (m, n) = (op.rows(), op.cols());
    if m == 0 || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "operator must be at least 1x1, got {m}x{n}"
        )));
    }
    if max_iters == 0 || !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "power iteration needs max_iters >= 1 and tol > 0 (got {max_iters}, {tol})"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut u = vec![0.0; m];
    let mut w = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iters {
        iterations += 1;
        op.apply(&v, &mut u);
        let s = checked_norm(&u)?;
        if s == 0.0 {
            return Ok(PowerOutcome {
                triplet: SingularTriplet::zero(m, n),
                converged: true,
                iterations,
            });
        }
        u.iter_mut().for_each(|x| *x /= s);
        op.apply_transpose(&u, &mut w);
        let sw = checked_norm(&w)?;
        if sw == 0.0 {
            return Ok(PowerOutcome {
                triplet: SingularTriplet::zero(m, n),
                converged: true,
                iterations,
            });
        }
        let residual = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - s * vi) * (wi - s * vi))
            .sum::<f64>()
            .sqrt();
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / sw;
        }
        if residual <= tol * sw {
            converged = true;
            break;
        }
    }

    op.apply(&v, &mut u);
    let sigma = checked_norm(&u)?;
    if sigma == 0.0 {
        return Ok(PowerOutcome {
            triplet: SingularTriplet::zero(m, n),
            converged: true,
            iterations,
        });
    }
    u.iter_mut().for_each(|x| *x /= sigma);
    normalize_sign(&mut u, &mut v);

    Ok(PowerOutcome {
        triplet: SingularTriplet { sigma, u, v },
        converged,
        iterations,
    })
}

/// `σ₁` estimate via [`top_singular_triplet`] with default settings.
pub fn spectral_norm_estimate(op: &dyn LinearOperator, seed: u64) -> Result<f64> {
    Ok(
        top_singular_triplet(op, seed, DEFAULT_MAX_ITERS, DEFAULT_TOL)?
            .triplet
            .sigma,
    )
}

fn checked_norm(x: &[f64]) -> Result<f64> {
    let n = dot(x, x).sqrt();
    if n.is_finite() {
        Ok(n)
    } else {
        Err(Error::NonFinite("operator application"))
    }
}

/// Flips `(u, v)` so that the largest-magnitude entry of `u` (first on ties)
/// is nonnegative.
fn normalize_sign(u: &mut [f64], v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in u.iter().enumerate() {
        if x.abs() > u[best].abs() {
            best = i;
        }
    }
    if u[best] < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
