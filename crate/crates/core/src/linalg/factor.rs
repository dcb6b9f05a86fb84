use super::dense::{dot, DenseMatrix};
use super::sparse::SparseObservations;
use crate::error::{Error, Result};

/// A low-rank matrix `A = U·Vᵀ` kept in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    u: DenseMatrix,
    v: DenseMatrix,
}

impl FactorPair {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(Error::DimensionMismatch(format!(
                "U has {} columns, V has {}",
                u.cols(),
                v.cols()
            )));
        }
        Ok(Self { u, v })
    }

    /// Rank-0 pair for an `m×n` matrix.
    pub fn empty(m: usize, n: usize) -> Self {
        Self::zeros(m, n, 0)
    }

    /// All-zero factors of width `r`.
    pub fn zeros(m: usize, n: usize, r: usize) -> Self {
        Self {
            u: DenseMatrix::zeros(m, r),
            v: DenseMatrix::zeros(n, r),
        }
    }

    #[inline]
    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn into_parts(self) -> (DenseMatrix, DenseMatrix) {
        (self.u, self.v)
    }

    /// Current width `r` (number of column pairs).
    #[inline]
    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.u.rows()
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.v.rows()
    }

    /// `(UVᵀ)_ij` as an r-term dot product.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        dot(self.u.row(i), self.v.row(j))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        self.u.matmul_t(&self.v)
    }

    pub fn append(&self, u: &[f64], v: &[f64]) -> FactorPair {
        FactorPair {
            u: self.u.append_column(u),
            v: self.v.append_column(v),
        }
    }

    pub fn remove_column(&self, j: usize) -> FactorPair {
        FactorPair {
            u: self.u.remove_column(j),
            v: self.v.remove_column(j),
        }
    }

    pub fn with_u(&self, u: DenseMatrix) -> FactorPair {
        assert_eq!(u.shape(), self.u.shape());
        FactorPair {
            u,
            v: self.v.clone(),
        }
    }

    pub fn with_v(&self, v: DenseMatrix) -> FactorPair {
        assert_eq!(v.shape(), self.v.shape());
        FactorPair {
            u: self.u.clone(),
            v,
        }
    }

    /// The first `k` column pairs.
    pub fn leading(&self, k: usize) -> FactorPair {
        FactorPair {
            u: self.u.leading_columns(k),
            v: self.v.leading_columns(k),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub(crate) fn check_dims(&self, rows: usize, cols: usize) -> Result<()> {
        if self.rows() != rows || self.cols() != cols {
            return Err(Error::DimensionMismatch(format!(
                "factors represent {}x{}, expected {}x{}",
                self.rows(),
                self.cols(),
                rows,
                cols
            )));
        }
        Ok(())
    }
}

/// `(UVᵀ)_ij` for every `(i, j)` in `omega`, in entry order.
pub fn project_observed(pair: &FactorPair, omega: &SparseObservations) -> Result<Vec<f64>> {
    pair.check_dims(omega.rows(), omega.cols())?;
    Ok(omega.iter().map(|(i, j, _)| pair.entry(i, j)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn omega(m: usize, n: usize, seed: u64) -> SparseObservations {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if rng.random_bool(0.4) {
                    entries.push((i, j, rng.random::<f64>()));
                }
            }
        }
        SparseObservations::new(m, n, entries).unwrap()
    }

    #[test]
    fn rank_zero_projects_to_zero() {
        let o = omega(5, 4, 1);
        let p = FactorPair::empty(5, 4);
        assert!(project_observed(&p, &o).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn ones_project_to_ones() {
        let o = omega(5, 4, 2);
        let p = FactorPair::new(
            DenseMatrix::from_fn(5, 1, |_, _| 1.0),
            DenseMatrix::from_fn(4, 1, |_, _| 1.0),
        )
        .unwrap();
        assert!(project_observed(&p, &o).unwrap().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn matches_materialized_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let o = omega(9, 7, 4);
        let p = FactorPair::new(
            DenseMatrix::from_fn(9, 3, |_, _| rng.random_range(-1.0..1.0)),
            DenseMatrix::from_fn(7, 3, |_, _| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let dense = p.u().matmul(&p.v().transpose());
        let got = project_observed(&p, &o).unwrap();
        for ((i, j, _), g) in o.iter().zip(got) {
            assert!((dense[(i, j)] - g).abs() <= 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let o = omega(5, 4, 5);
        assert!(project_observed(&FactorPair::empty(4, 4), &o).is_err());
        assert!(FactorPair::new(DenseMatrix::zeros(3, 2), DenseMatrix::zeros(3, 1)).is_err());
    }
}
