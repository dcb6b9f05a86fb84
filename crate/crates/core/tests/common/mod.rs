#![allow(dead_code)]

use lowrank::linalg::{DenseMatrix, SparseObservations};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `rows × cols` with orthonormal columns (modified Gram-Schmidt, run twice).
pub fn orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    assert!(cols <= rows);
    let mut q = gaussian(rng, rows, cols);
    for _ in 0..2 {
        for j in 0..cols {
            for k in 0..j {
                let d: f64 = (0..rows).map(|i| q[(i, j)] * q[(i, k)]).sum();
                for i in 0..rows {
                    q[(i, j)] -= d * q[(i, k)];
                }
            }
            let norm = q.column_norm(j);
            for i in 0..rows {
                q[(i, j)] /= norm;
            }
        }
    }
    q
}

/// A matrix with prescribed singular values and random singular vectors.
pub struct Spectral {
    pub left: DenseMatrix,
    pub sigma: Vec<f64>,
    pub right: DenseMatrix,
}

impl Spectral {
    pub fn random(rng: &mut ChaCha8Rng, m: usize, n: usize, sigma: Vec<f64>) -> Self {
        let k = sigma.len();
        Self {
            left: orthonormal(rng, m, k),
            sigma,
            right: orthonormal(rng, n, k),
        }
    }

    /// Top `r` terms; `r = sigma.len()` gives the matrix itself.
    pub fn truncated(&self, r: usize) -> DenseMatrix {
        let (m, n) = (self.left.rows(), self.right.rows());
        DenseMatrix::from_fn(m, n, |i, j| {
            (0..r.min(self.sigma.len()))
                .map(|c| self.left[(i, c)] * self.sigma[c] * self.right[(j, c)])
                .sum()
        })
    }

    pub fn dense(&self) -> DenseMatrix {
        self.truncated(self.sigma.len())
    }

    /// `½ Σ_{i>r} σ_i²`: the least squares error of the best rank-`r` fit.
    pub fn tail_energy(&self, r: usize) -> f64 {
        0.5 * self.sigma.iter().skip(r).map(|s| s * s).sum::<f64>()
    }
}

/// Singular values `(k − i) + U(0, ½)`, so consecutive values differ by
/// at least ½.
pub fn separated_spectrum(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| (k - i) as f64 + rng.random_range(0.0..0.5))
        .collect()
}

pub fn fully_observed(a: &DenseMatrix) -> SparseObservations {
    let mut e = Vec::with_capacity(a.rows() * a.cols());
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            e.push((i, j, a[(i, j)]));
        }
    }
    SparseObservations::new(a.rows(), a.cols(), e).unwrap()
}

pub fn relative_error(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm()
}

/// Square `n × n` matrix with a [`separated_spectrum`].
pub fn separated_matrix(rng: &mut ChaCha8Rng, n: usize) -> Spectral {
    let sigma = separated_spectrum(rng, n);
    Spectral::random(rng, n, n, sigma)
}
