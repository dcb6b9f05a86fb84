//! Small dense SVD by one-sided Jacobi rotations, and the operations built
//! on it: rank-`r` singular value thresholding and orthonormal bases of
//! column spans.

use super::dense::DenseMatrix;
use super::factor::FactorPair;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U·diag(σ)·Vᵀ` with `k = min(m, n)` triplets sorted by
/// nonincreasing σ. Columns of `U` belonging to σ = 0 are zero.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.sigma) {
                *x *= s;
            }
        }
        us.matmul_t(&self.v)
    }

    /// Numerical rank with relative cutoff `rel_tol·σ₁`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.sigma.first().copied().unwrap_or(0.0);
        self.sigma
            .iter()
            .filter(|&&s| s > rel_tol * top && s > 0.0)
            .count()
    }
}

/// One-sided Jacobi SVD.
pub fn svd(a: &DenseMatrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    let (m, n) = a.shape();
    if m >= n {
        Ok(jacobi_tall(a))
    } else {
        let t = jacobi_tall(&a.transpose());
        Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

/// SVD of `a` with the rotations started from `a·v0`, where `v0` is an
/// `n×n` orthogonal guess for the right singular vectors. Converges in
/// few sweeps when the guess is close. Falls back to [`svd`] for wide `a`
/// or a mismatched guess.
pub fn svd_warm(a: &DenseMatrix, v0: &DenseMatrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    let (m, n) = a.shape();
    if m < n || v0.shape() != (n, n) {
        return svd(a);
    }
    let dec = jacobi_tall(&a.matmul(v0));
    Ok(Svd {
        u: dec.u,
        sigma: dec.sigma,
        v: v0.matmul(&dec.v),
    })
}

// Requires rows >= cols. Columns of A are held as rows of `w` so that the
// rotations touch contiguous memory.
fn jacobi_tall(a: &DenseMatrix) -> Svd {
    let (m, n) = a.shape();
    let mut w = a.transpose(); // n×m, row j = column j of A
    let mut v = DenseMatrix::identity(n); // row j = column j of V
    let eps = f64::EPSILON;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let wp = w.row(p);
                    let wq = w.row(q);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in wp.iter().zip(wq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(usize, f64)> = (0..n)
        .map(|j| (j, w.row(j).iter().map(|x| x * x).sum::<f64>().sqrt()))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut u_out = DenseMatrix::zeros(m, n);
    let mut v_out = DenseMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &(j, s)) in order.iter().enumerate() {
        sigma.push(s);
        if s > 0.0 {
            for (i, &x) in w.row(j).iter().enumerate() {
                u_out[(i, k)] = x / s;
            }
        }
        for (i, &x) in v.row(j).iter().enumerate() {
            v_out[(i, k)] = x;
        }
    }
    Svd {
        u: u_out,
        sigma,
        v: v_out,
    }
}

fn rotate_rows(m: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// `H_r(A)` in factored form `(U_r·Σ_r, V_r)` together with the retained
/// singular values in nonincreasing order.
pub fn svd_threshold(a: &DenseMatrix, r: usize) -> Result<(FactorPair, Vec<f64>)> {
    let dec = svd(a)?;
    let keep = r.min(dec.sigma.len());
    let mut u = dec.u.leading_columns(keep);
    for i in 0..u.rows() {
        for (x, s) in u.row_mut(i).iter_mut().zip(&dec.sigma) {
            *x *= s;
        }
    }
    let v = dec.v.leading_columns(keep);
    let values = dec.sigma[..keep].to_vec();
    Ok((FactorPair::new(u, v)?, values))
}

/// Relative cutoff below which a direction is treated as outside a span.
pub const SPAN_TOL: f64 = 1e-13;

/// Factors `a = Q·C` with `Q` having orthonormal columns spanning the
/// numerical column space of `a` (cutoff `SPAN_TOL·σ₁`).
pub fn span_basis(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let dec = svd(a)?;
    let k = dec.rank(SPAN_TOL);
    let q = dec.u.leading_columns(k);
    // C = Σ_k · V_kᵀ
    let c = DenseMatrix::from_fn(k, a.cols(), |i, j| dec.sigma[i] * dec.v[(j, i)]);
    Ok((q, c))
}

/// Exact SVD of `U·Vᵀ` computed through the factors, without forming the
/// `m×n` product. Only numerically nonzero triplets are returned.
pub fn factored_svd(pair: &FactorPair) -> Result<Svd> {
    let (qu, cu) = span_basis(pair.u())?;
    let (qv, cv) = span_basis(pair.v())?;
    let core = cu.matmul_t(&cv); // ku × kv
    if core.rows() == 0 || core.cols() == 0 {
        return Ok(Svd {
            u: DenseMatrix::zeros(pair.rows(), 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(pair.cols(), 0),
        });
    }
    let inner = svd(&core)?;
    Ok(Svd {
        u: qu.matmul(&inner.u),
        sigma: inner.sigma,
        v: qv.matmul(&inner.v),
    })
}
