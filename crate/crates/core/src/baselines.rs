//! SoftImpute: iterative singular value soft-thresholding for matrix
//! completion.

use crate::error::{Error, Result};
use crate::linalg::{
    spectral_norm_estimate, svd_warm, DenseMatrix, FactorPair, SparseObservations,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftImputeConfig {
    pub lambda: f64,
    pub max_rank: usize,
    pub max_iters: usize,
    /// Stop once `‖A_new − A‖_F ≤ tol·‖A‖_F`.
    pub tol: f64,
}

impl SoftImputeConfig {
    pub fn new(lambda: f64, max_rank: usize) -> Self {
        Self {
            lambda,
            max_rank,
            max_iters: 500,
            tol: 1e-5,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftImputeStep {
    pub iter: usize,
    /// `½‖Π_Ω(M − A)‖² + λ‖A‖_*`
    pub objective: f64,
    pub rel_change: f64,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct SoftImputeResult {
    /// `(U·diag(s), V)` with one column per retained singular value.
    pub pair: FactorPair,
    pub trace: Vec<SoftImputeStep>,
    pub converged: bool,
}

/// Runs `A ← SVT_λ(Π_Ω(M) + Π_Ω^⊥(A))` from `A = 0`.
pub fn soft_impute(
    target: &SparseObservations,
    config: &SoftImputeConfig,
) -> Result<SoftImputeResult> {
    soft_impute_from(target, config, None)
}

/// As [`soft_impute`], starting from `warm` when given.
pub fn soft_impute_from(
    target: &SparseObservations,
    config: &SoftImputeConfig,
    warm: Option<&FactorPair>,
) -> Result<SoftImputeResult> {
    config.validate()?;
    let (m, n) = (target.rows(), target.cols());
    let mut a = match warm {
        Some(p) => {
            p.check_dims(m, n)?;
            p.to_dense()
        }
        None => DenseMatrix::zeros(m, n),
    };
    // guess for the right singular vectors of the filled matrix
    let mut basis = if m >= n {
        DenseMatrix::identity(n)
    } else {
        DenseMatrix::identity(m)
    };
    let mut pair = FactorPair::empty(m, n);
    let mut trace = Vec::new();
    let mut converged = false;

    for iter in 0..config.max_iters {
        let mut z = a.clone();
        for (i, j, v) in target.iter() {
            z[(i, j)] = v;
        }
        let (u, sigma, v) = if m >= n {
            let dec = svd_warm(&z, &basis)?;
            basis = dec.v.clone();
            (dec.u, dec.sigma, dec.v)
        } else {
            let dec = svd_warm(&z.transpose(), &basis)?;
            basis = dec.v.clone();
            (dec.v, dec.sigma, dec.u)
        };
        let shrunk: Vec<f64> = sigma
            .iter()
            .take(config.max_rank)
            .map(|s| (s - config.lambda).max(0.0))
            .filter(|&s| s > 0.0)
            .collect();
        let k = shrunk.len();
        let us = DenseMatrix::from_fn(m, k, |i, c| u[(i, c)] * shrunk[c]);
        let next = FactorPair::new(us, v.leading_columns(k))?;
        let a_new = next.to_dense();

        let norm_old = a.frobenius_norm();
        let change = a_new.sub(&a).frobenius_norm();
        let rel_change = if norm_old > 0.0 {
            change / norm_old
        } else if change == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let fit: f64 = target
            .iter()
            .map(|(i, j, v)| (v - a_new[(i, j)]) * (v - a_new[(i, j)]))
            .sum();
        trace.push(SoftImputeStep {
            iter,
            objective: 0.5 * fit + config.lambda * shrunk.iter().sum::<f64>(),
            rel_change,
            rank: k,
        });
        a = a_new;
        pair = next;
        if rel_change <= config.tol {
            converged = true;
            break;
        }
    }
    Ok(SoftImputeResult {
        pair,
        trace,
        converged,
    })
}

/// `count` geometric values from `σ₁(Π_Ω(M))` down to `0.01·σ₁`.
pub fn lambda_grid(target: &SparseObservations, count: usize) -> Result<Vec<f64>> {
    let top = spectral_norm_estimate(target, 0)?;
    Ok(match count {
        0 => Vec::new(),
        1 => vec![top],
        _ => (0..count)
            .map(|k| top * 0.01f64.powf(k as f64 / (count - 1) as f64))
            .collect(),
    })
}

/// One fit per λ, in the given order, each warm-started from the previous.
pub fn soft_impute_path(
    target: &SparseObservations,
    lambdas: &[f64],
    base: &SoftImputeConfig,
) -> Result<Vec<SoftImputeResult>> {
    let mut out: Vec<SoftImputeResult> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let config = SoftImputeConfig { lambda, ..*base };
        let warm = out.last().map(|r| &r.pair);
        out.push(soft_impute_from(target, &config, warm)?);
    }
    Ok(out)
}
