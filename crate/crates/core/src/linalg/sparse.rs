use std::collections::HashSet;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Sparsity pattern of an observed set, grouped by row and by column.
///
/// Entry `k` sits at `(row_of[k], col_of[k])`. `by_col[col_ptr[j]..col_ptr[j + 1]]`
/// lists the entry indices of column `j` in increasing row order, and
/// likewise for rows.
#[derive(Debug, PartialEq)]
struct Pattern {
    rows: usize,
    cols: usize,
    row_of: Vec<usize>,
    col_of: Vec<usize>,
    col_ptr: Vec<usize>,
    by_col: Vec<usize>,
    row_ptr: Vec<usize>,
    by_row: Vec<usize>,
}

impl Pattern {
    fn build(rows: usize, cols: usize, row_of: Vec<usize>, col_of: Vec<usize>) -> Self {
        let group = |key: &[usize], other: &[usize], groups: usize| {
            let mut ptr = vec![0usize; groups + 1];
            for &g in key {
                ptr[g + 1] += 1;
            }
            for g in 0..groups {
                ptr[g + 1] += ptr[g];
            }
            let mut order: Vec<usize> = (0..key.len()).collect();
            order.sort_by_key(|&k| (key[k], other[k]));
            (ptr, order)
        };
        let (col_ptr, by_col) = group(&col_of, &row_of, cols);
        let (row_ptr, by_row) = group(&row_of, &col_of, rows);
        Self {
            rows,
            cols,
            row_of,
            col_of,
            col_ptr,
            by_col,
            row_ptr,
            by_row,
        }
    }
}

/// An observed set Ω with one value per observed cell.
///
/// Used both for observed targets and for sparse gradients. Gradients share
/// the pattern of their target through [`SparseObservations::with_values`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseObservations {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SparseObservations {
    /// Validates bounds, duplicates and finiteness, and builds the row and
    /// column groupings. Entry order is preserved.
    pub fn new(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        let mut row_of = Vec::with_capacity(entries.len());
        let mut col_of = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (k, &(i, j, v)) in entries.iter().enumerate() {
            if i >= rows || j >= cols {
                return Err(Error::InvalidObservations(format!(
                    "entry {k} at ({i}, {j}) outside {rows}x{cols}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidObservations(format!(
                    "duplicate entry at ({i}, {j})"
                )));
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("observation value"));
            }
            row_of.push(i);
            col_of.push(j);
            values.push(v);
        }
        Ok(Self {
            pattern: Arc::new(Pattern::build(rows, cols, row_of, col_of)),
            values,
        })
    }

    /// Same pattern, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len(), "value count");
        Self {
            pattern: Arc::clone(&self.pattern),
            values,
        }
    }

    pub fn shares_pattern(&self, other: &SparseObservations) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.pattern.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.pattern.cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row_index(&self, k: usize) -> usize {
        self.pattern.row_of[k]
    }

    #[inline]
    pub fn col_index(&self, k: usize) -> usize {
        self.pattern.col_of[k]
    }

    /// `(row, col, value)` in entry order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pattern
            .row_of
            .iter()
            .zip(&self.pattern.col_of)
            .zip(&self.values)
            .map(|((&i, &j), &v)| (i, j, v))
    }

    /// Entry indices observed in column `j`, ordered by row.
    pub fn column_entries(&self, j: usize) -> &[usize] {
        let p = &self.pattern;
        &p.by_col[p.col_ptr[j]..p.col_ptr[j + 1]]
    }

    /// Entry indices observed in row `i`, ordered by column.
    pub fn row_entries(&self, i: usize) -> &[usize] {
        let p = &self.pattern;
        &p.by_row[p.row_ptr[i]..p.row_ptr[i + 1]]
    }

    /// Observed row indices of column `j`.
    pub fn column_rows(&self, j: usize) -> Vec<usize> {
        self.column_entries(j)
            .iter()
            .map(|&k| self.pattern.row_of[k])
            .collect()
    }

    pub fn sum_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self) -> crate::linalg::DenseMatrix {
        let mut m = crate::linalg::DenseMatrix::zeros(self.rows(), self.cols());
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    /// Observed cells of a dense matrix, in this set's entry order.
    pub fn sample_dense(&self, a: &crate::linalg::DenseMatrix) -> Vec<f64> {
        self.iter().map(|(i, j, _)| a[(i, j)]).collect()
    }
}
