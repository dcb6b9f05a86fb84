//! Convex objectives `R(A)` over factored iterates.
//!
//! Gradient convention: for the observed-entry quadratic,
//! `∇R(A) = Π_Ω(A − M)`. Every solver consumes gradients in this sign.

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix, FactorPair, LinearOperator, SparseObservations};

/// `∇R(A)` either on the observed pattern or as a dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum GradientHandle {
    Sparse(SparseObservations),
    Dense(DenseMatrix),
}

impl GradientHandle {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            GradientHandle::Sparse(s) => (s.rows(), s.cols()),
            GradientHandle::Dense(d) => d.shape(),
        }
    }

    pub fn as_operator(&self) -> &dyn LinearOperator {
        match self {
            GradientHandle::Sparse(s) => s,
            GradientHandle::Dense(d) => d,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            GradientHandle::Sparse(s) => s.to_dense(),
            GradientHandle::Dense(d) => d.clone(),
        }
    }

    /// `⟨G, X⟩` for a dense `X`.
    pub fn inner(&self, x: &DenseMatrix) -> f64 {
        match self {
            GradientHandle::Sparse(s) => s.iter().map(|(i, j, g)| g * x[(i, j)]).sum(),
            GradientHandle::Dense(d) => d.inner(x),
        }
    }

    /// `⟨G, U·Vᵀ⟩`
    pub fn inner_factored(&self, p: &FactorPair) -> f64 {
        match self {
            GradientHandle::Sparse(s) => s.iter().map(|(i, j, g)| g * p.entry(i, j)).sum(),
            GradientHandle::Dense(d) => d.inner(&p.to_dense()),
        }
    }

    /// `Lᵀ·G·R` for `L` (m×a) and `R` (n×b).
    pub fn sandwich(&self, left: &DenseMatrix, right: &DenseMatrix) -> DenseMatrix {
        match self {
            GradientHandle::Sparse(s) => {
                let mut out = DenseMatrix::zeros(left.cols(), right.cols());
                for (i, j, g) in s.iter() {
                    if g == 0.0 {
                        continue;
                    }
                    let li = left.row(i);
                    let rj = right.row(j);
                    for (a, &la) in li.iter().enumerate() {
                        let c = g * la;
                        for (o, &rb) in out.row_mut(a).iter_mut().zip(rj) {
                            *o += c * rb;
                        }
                    }
                }
                out
            }
            GradientHandle::Dense(d) => left.t_matmul(&d.matmul(right)),
        }
    }

    /// `G·V` (m×r)
    pub fn times(&self, v: &DenseMatrix) -> DenseMatrix {
        match self {
            GradientHandle::Sparse(s) => {
                let mut out = DenseMatrix::zeros(s.rows(), v.cols());
                for (i, j, g) in s.iter() {
                    for (o, &x) in out.row_mut(i).iter_mut().zip(v.row(j)) {
                        *o += g * x;
                    }
                }
                out
            }
            GradientHandle::Dense(d) => d.matmul(v),
        }
    }

    /// `Gᵀ·U` (n×r)
    pub fn t_times(&self, u: &DenseMatrix) -> DenseMatrix {
        match self {
            GradientHandle::Sparse(s) => {
                let mut out = DenseMatrix::zeros(s.cols(), u.cols());
                for (i, j, g) in s.iter() {
                    for (o, &x) in out.row_mut(j).iter_mut().zip(u.row(i)) {
                        *o += g * x;
                    }
                }
                out
            }
            GradientHandle::Dense(d) => d.t_matmul(u),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            GradientHandle::Sparse(s) => s.sum_squares().sqrt(),
            GradientHandle::Dense(d) => d.frobenius_norm(),
        }
    }
}

/// `R(A) = ½‖L(A) − b‖²` for a linear map `L`, evaluated on
/// `A = Qu·Y·Qvᵀ`. Lets the full inner solve run as a least-squares
/// problem in the coefficients `Y`.
pub trait LeastSquaresForm: Sync {
    fn residual_len(&self) -> usize;
    fn rhs(&self) -> Vec<f64>;
    /// `L(Qu·Y·Qvᵀ)`
    fn forward(&self, qu: &DenseMatrix, y: &DenseMatrix, qv: &DenseMatrix) -> Vec<f64>;
    /// `Quᵀ·L*(w)·Qv`
    fn adjoint(&self, w: &[f64], qu: &DenseMatrix, qv: &DenseMatrix) -> DenseMatrix;
}

/// A convex function of an `m×n` matrix, evaluated through its factors.
pub trait Objective: Sync {
    fn dims(&self) -> (usize, usize);

    fn value(&self, p: &FactorPair) -> f64;

    fn gradient(&self, p: &FactorPair) -> GradientHandle;

    /// Gradient used to pick the inserted rank-1 term. Equal to
    /// [`Objective::gradient`] unless an objective overrides it.
    fn insertion_gradient(&self, p: &FactorPair) -> GradientHandle {
        self.gradient(p)
    }

    /// Observed target when `R` is the observed-entry quadratic, which makes
    /// the one-sided inner problem split into per-row / per-column systems.
    fn observed_target(&self) -> Option<&SparseObservations> {
        None
    }

    fn least_squares(&self) -> Option<&dyn LeastSquaresForm> {
        None
    }
}

fn check_target(p: &FactorPair, target: &SparseObservations) -> Result<()> {
    if p.rows() != target.rows() || p.cols() != target.cols() {
        return Err(Error::DimensionMismatch(format!(
            "factors represent {}x{}, target is {}x{}",
            p.rows(),
            p.cols(),
            target.rows(),
            target.cols()
        )));
    }
    Ok(())
}

/// `½‖Π_Ω(M − UVᵀ)‖²`
pub fn observed_quadratic_value(p: &FactorPair, target: &SparseObservations) -> Result<f64> {
    check_target(p, target)?;
    Ok(quadratic_value_unchecked(p, target))
}

fn quadratic_value_unchecked(p: &FactorPair, target: &SparseObservations) -> f64 {
    0.5 * target
        .iter()
        .map(|(i, j, m)| {
            let r = m - p.entry(i, j);
            r * r
        })
        .sum::<f64>()
}

/// `Π_Ω(UVᵀ − M)` on the target's pattern.
pub fn observed_quadratic_gradient(
    p: &FactorPair,
    target: &SparseObservations,
) -> Result<GradientHandle> {
    check_target(p, target)?;
    Ok(quadratic_gradient_unchecked(p, target))
}

fn quadratic_gradient_unchecked(p: &FactorPair, target: &SparseObservations) -> GradientHandle {
    let values = target.iter().map(|(i, j, m)| p.entry(i, j) - m).collect();
    GradientHandle::Sparse(target.with_values(values))
}

/// `Π_Ω(clamp(UVᵀ, lo, hi) − M)`
pub fn clipped_gradient(
    p: &FactorPair,
    target: &SparseObservations,
    clip_lo: f64,
    clip_hi: f64,
) -> Result<GradientHandle> {
    check_target(p, target)?;
    if !(clip_lo < clip_hi) {
        return Err(Error::InvalidConfig(format!(
            "clip range [{clip_lo}, {clip_hi}] is empty"
        )));
    }
    Ok(clipped_gradient_unchecked(p, target, clip_lo, clip_hi))
}

fn clipped_gradient_unchecked(
    p: &FactorPair,
    target: &SparseObservations,
    lo: f64,
    hi: f64,
) -> GradientHandle {
    let values = target
        .iter()
        .map(|(i, j, m)| p.entry(i, j).clamp(lo, hi) - m)
        .collect();
    GradientHandle::Sparse(target.with_values(values))
}

/// Huber function `H_δ(x)`: `x²/2` for `|x| ≤ δ`, else `δ|x| − δ²/2`.
#[inline]
pub fn huber(x: f64, delta: f64) -> f64 {
    let a = x.abs();
    if a <= delta {
        0.5 * x * x
    } else {
        delta * a - 0.5 * delta * delta
    }
}

/// `Σ_ij H_δ((UVᵀ − M)_ij)`
pub fn huber_value(p: &FactorPair, target: &DenseMatrix, delta: f64) -> Result<f64> {
    check_dense(p, target)?;
    check_delta(delta)?;
    Ok(huber_value_unchecked(p, target, delta))
}

fn huber_value_unchecked(p: &FactorPair, target: &DenseMatrix, delta: f64) -> f64 {
    let a = p.to_dense();
    a.as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(x, m)| huber(x - m, delta))
        .sum()
}

/// Dense gradient `clamp((UVᵀ − M)_ij, −δ, δ)`.
pub fn huber_gradient(p: &FactorPair, target: &DenseMatrix, delta: f64) -> Result<GradientHandle> {
    check_dense(p, target)?;
    check_delta(delta)?;
    Ok(huber_gradient_unchecked(p, target, delta))
}

fn huber_gradient_unchecked(p: &FactorPair, target: &DenseMatrix, delta: f64) -> GradientHandle {
    let mut a = p.to_dense();
    for (x, m) in a.as_mut_slice().iter_mut().zip(target.as_slice()) {
        *x = (*x - m).clamp(-delta, delta);
    }
    GradientHandle::Dense(a)
}

fn check_dense(p: &FactorPair, target: &DenseMatrix) -> Result<()> {
    if (p.rows(), p.cols()) != target.shape() {
        return Err(Error::DimensionMismatch(format!(
            "factors represent {}x{}, target is {}x{}",
            p.rows(),
            p.cols(),
            target.rows(),
            target.cols()
        )));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "huber delta must be > 0, got {delta}"
        )))
    }
}

/// `R(A) = ½‖Π_Ω(M − A)‖²`
#[derive(Debug, Clone)]
pub struct ObservedQuadratic {
    target: SparseObservations,
}

impl ObservedQuadratic {
    pub fn new(target: SparseObservations) -> Self {
        Self { target }
    }

    pub fn target(&self) -> &SparseObservations {
        &self.target
    }
}

impl Objective for ObservedQuadratic {
    fn dims(&self) -> (usize, usize) {
        (self.target.rows(), self.target.cols())
    }

    fn value(&self, p: &FactorPair) -> f64 {
        quadratic_value_unchecked(p, &self.target)
    }

    fn gradient(&self, p: &FactorPair) -> GradientHandle {
        quadratic_gradient_unchecked(p, &self.target)
    }

    fn observed_target(&self) -> Option<&SparseObservations> {
        Some(&self.target)
    }

    fn least_squares(&self) -> Option<&dyn LeastSquaresForm> {
        Some(self)
    }
}

impl LeastSquaresForm for ObservedQuadratic {
    fn residual_len(&self) -> usize {
        self.target.len()
    }

    fn rhs(&self) -> Vec<f64> {
        self.target.values().to_vec()
    }

    fn forward(&self, qu: &DenseMatrix, y: &DenseMatrix, qv: &DenseMatrix) -> Vec<f64> {
        let left = qu.matmul(y); // m × kv
        self.target
            .iter()
            .map(|(i, j, _)| dot(left.row(i), qv.row(j)))
            .collect()
    }

    fn adjoint(&self, w: &[f64], qu: &DenseMatrix, qv: &DenseMatrix) -> DenseMatrix {
        GradientHandle::Sparse(self.target.with_values(w.to_vec())).sandwich(qu, qv)
    }
}

/// Observed quadratic whose insertion step sees predictions clamped to
/// `[clip_lo, clip_hi]`. Value, gradient and inner solves are the
/// unclipped quadratic.
#[derive(Debug, Clone)]
pub struct ClippedObservedQuadratic {
    inner: ObservedQuadratic,
    clip_lo: f64,
    clip_hi: f64,
}

impl ClippedObservedQuadratic {
    pub fn new(target: SparseObservations, clip_lo: f64, clip_hi: f64) -> Result<Self> {
        if !(clip_lo < clip_hi) {
            return Err(Error::InvalidConfig(format!(
                "clip range [{clip_lo}, {clip_hi}] is empty"
            )));
        }
        Ok(Self {
            inner: ObservedQuadratic::new(target),
            clip_lo,
            clip_hi,
        })
    }

    pub fn clip_range(&self) -> (f64, f64) {
        (self.clip_lo, self.clip_hi)
    }
}

impl Objective for ClippedObservedQuadratic {
    fn dims(&self) -> (usize, usize) {
        self.inner.dims()
    }

    fn value(&self, p: &FactorPair) -> f64 {
        self.inner.value(p)
    }

    fn gradient(&self, p: &FactorPair) -> GradientHandle {
        self.inner.gradient(p)
    }

    fn insertion_gradient(&self, p: &FactorPair) -> GradientHandle {
        clipped_gradient_unchecked(p, &self.inner.target, self.clip_lo, self.clip_hi)
    }

    fn observed_target(&self) -> Option<&SparseObservations> {
        Some(&self.inner.target)
    }

    fn least_squares(&self) -> Option<&dyn LeastSquaresForm> {
        Some(&self.inner)
    }
}

/// `R(L) = Σ_ij H_δ((L − M)_ij)` over a fully observed `M`.
#[derive(Debug, Clone)]
pub struct HuberLowRank {
    target: DenseMatrix,
    delta: f64,
}

impl HuberLowRank {
    pub fn new(target: DenseMatrix, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self { target, delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn target(&self) -> &DenseMatrix {
        &self.target
    }
}

impl Objective for HuberLowRank {
    fn dims(&self) -> (usize, usize) {
        self.target.shape()
    }

    fn value(&self, p: &FactorPair) -> f64 {
        huber_value_unchecked(p, &self.target, self.delta)
    }

    fn gradient(&self, p: &FactorPair) -> GradientHandle {
        huber_gradient_unchecked(p, &self.target, self.delta)
    }
}
