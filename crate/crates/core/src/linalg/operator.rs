use super::dense::{axpy, dot, DenseMatrix};
use super::sparse::SparseObservations;

/// A matrix known only through its products with vectors.
///
/// Implementations must be pure: the same input always produces the same
/// output, and both products may be called from several threads.
pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `out = G·x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = Gᵀ·y`
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]);
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        DenseMatrix::rows(self)
    }

    fn cols(&self) -> usize {
        DenseMatrix::cols(self)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                axpy(yi, self.row(i), out);
            }
        }
    }
}

impl LinearOperator for SparseObservations {
    fn rows(&self) -> usize {
        SparseObservations::rows(self)
    }

    fn cols(&self) -> usize {
        SparseObservations::cols(self)
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, j, v) in self.iter() {
            out[i] += v * x[j];
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, j, v) in self.iter() {
            out[j] += v * y[i];
        }
    }
}

/// Operator backed by a pair of closures.
pub struct FnOperator<F, G> {
    rows: usize,
    cols: usize,
    apply: F,
    apply_transpose: G,
}

impl<F, G> FnOperator<F, G>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(rows: usize, cols: usize, apply: F, apply_transpose: G) -> Self {
        Self {
            rows,
            cols,
            apply,
            apply_transpose,
        }
    }
}

impl<F, G> LinearOperator for FnOperator<F, G>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.apply)(x, out)
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        (self.apply_transpose)(y, out)
    }
}
