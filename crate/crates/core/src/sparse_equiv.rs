//! Sparse regression as a special case of the rank-constrained problem.
//!
//! A vector objective `f(x) = ½‖D·x − y‖²` lifts to matrices through
//! `R(A) = f(diag A) + β/2·‖A − Diag(diag A)‖²_F`. On this objective Greedy
//! and Local Search keep their iterates diagonal and reproduce OMP and
//! OMPR step for step; [`check_equivalence`] runs both sides and compares.

use crate::error::{Error, Result};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{
    dot, span_basis, spectral_norm_estimate, svd, DenseMatrix, FactorPair, PowerConfig,
};
use crate::objectives::{GradientHandle, LeastSquaresForm, Objective};
use crate::solvers::{greedy_observed, local_search_from, SolverConfig, ZERO_GRADIENT_RTOL};

/// Relative singular-value cutoff for the support refit.
const REFIT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SparseRegressionProblem {
    /// `examples × n`
    pub design: DenseMatrix,
    pub response: Vec<f64>,
    /// Sparsity `s*` of the planted minimizer.
    pub sparsity: usize,
}

impl SparseRegressionProblem {
    pub fn new(design: DenseMatrix, response: Vec<f64>, sparsity: usize) -> Result<Self> {
        if design.rows() != response.len() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows, response has {} entries",
                design.rows(),
                response.len()
            )));
        }
        if sparsity > design.cols() {
            return Err(Error::InvalidConfig(format!(
                "sparsity {sparsity} exceeds dimension {}",
                design.cols()
            )));
        }
        if !design.is_finite() || response.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regression data"));
        }
        Ok(Self {
            design,
            response,
            sparsity,
        })
    }

    /// `response = design · x_star`, so `x_star` is a global minimizer.
    pub fn planted(design: DenseMatrix, x_star: &[f64]) -> Result<Self> {
        if x_star.len() != design.cols() {
            return Err(Error::DimensionMismatch(format!(
                "planted vector has {} entries, design has {} columns",
                x_star.len(),
                design.cols()
            )));
        }
        let response = design.matvec(x_star);
        let sparsity = x_star.iter().filter(|v| **v != 0.0).count();
        Self::new(design, response, sparsity)
    }

    /// Adds seeded `U(−level, level)` noise to every response entry, so the
    /// planted vector is no longer an exact minimizer.
    pub fn with_response_noise(&self, level: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let response = self
            .response
            .iter()
            .map(|v| v + level * rng.random_range(-1.0..=1.0))
            .collect();
        Self::new(self.design.clone(), response, self.sparsity)
    }

    /// `‖D‖₂²`, the smoothness constant of `f`; the default off-diagonal
    /// weight of the lifted objective.
    pub fn default_beta(&self) -> Result<f64> {
        Ok(spectral_norm_estimate(&self.design, 0)?.powi(2))
    }

    pub fn dim(&self) -> usize {
        self.design.cols()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r = self.residual(x);
        0.5 * dot(&r, &r)
    }

    /// `Dᵀ(D·x − y)`
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.design.t_matvec(&self.residual(x))
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.design.matvec(x);
        for (ri, yi) in r.iter_mut().zip(&self.response) {
            *ri -= yi;
        }
        r
    }

    /// Least squares restricted to `support`, minimum-norm when the
    /// selected columns are dependent. Returns the full-length vector and
    /// whether the fit was rank deficient.
    pub fn refit(&self, support: &[usize]) -> Result<(Vec<f64>, bool)> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        if support.is_empty() {
            return Ok((x, false));
        }
        let sub = DenseMatrix::from_fn(self.design.rows(), support.len(), |i, k| {
            self.design[(i, support[k])]
        });
        let dec = svd(&sub)?;
        let rank = dec.rank(REFIT_RTOL);
        let uty = dec.u.t_matvec(&self.response);
        for k in 0..support.len() {
            let mut c = 0.0;
            for l in 0..rank {
                c += dec.v[(k, l)] * uty[l] / dec.sigma[l];
            }
            x[support[k]] = c;
        }
        Ok((x, rank < support.len()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    /// `n×n` with orthonormal columns.
    Orthonormal,
    /// `2n×n` Gaussian with unit-norm columns.
    Gaussian,
}

/// Seeded planted instance: `sparsity` nonzero coefficients at uniform
/// positions, with magnitudes `1 + k + U(0, ½)` for `k = 0, 1, …` and random
/// signs.
pub fn planted_instance(
    n: usize,
    sparsity: usize,
    kind: DesignKind,
    seed: u64,
) -> Result<SparseRegressionProblem> {
    if n == 0 || sparsity > n {
        return Err(Error::InvalidConfig(format!(
            "need 0 <= sparsity <= n and n >= 1, got n = {n}, sparsity = {sparsity}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = match kind {
        DesignKind::Orthonormal => n,
        DesignKind::Gaussian => 2 * n,
    };
    let raw = DenseMatrix::from_fn(rows, n, |_, _| StandardNormal.sample(&mut rng));
    let design = match kind {
        DesignKind::Orthonormal => {
            let (q, _) = span_basis(&raw)?;
            if q.cols() != n {
                return Err(Error::InvalidConfig("degenerate random design".into()));
            }
            q
        }
        DesignKind::Gaussian => {
            DenseMatrix::from_fn(rows, n, |i, j| raw[(i, j)] / raw.column_norm(j))
        }
    };
    let mut x_star = vec![0.0; n];
    for (k, pos) in sample(&mut rng, n, sparsity).into_iter().enumerate() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        x_star[pos] = sign * (1.0 + k as f64 + rng.random_range(0.0..0.5));
    }
    SparseRegressionProblem::planted(design, &x_star)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    /// Current support in insertion order.
    pub support: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// Some refit along the way was rank deficient.
    pub rank_deficient: bool,
    /// Coefficients after each step.
    pub iterates: Vec<Vec<f64>>,
}

/// Index of the largest `|g_i|` over `allowed` coordinates, lowest index
/// on ties.
fn argmax_abs(g: &[f64], allowed: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in g.iter().enumerate() {
        if !allowed(i) {
            continue;
        }
        if best.is_none_or(|(_, b)| v.abs() > b) {
            best = Some((i, v.abs()));
        }
    }
    best
}

/// Orthogonal matching pursuit: add the coordinate with the largest
/// gradient magnitude, then refit on the support. Stops early once the
/// gradient vanishes.
pub fn omp(problem: &SparseRegressionProblem, steps: usize) -> Result<SparseSolution> {
    if steps > problem.dim() {
        return Err(Error::InvalidConfig(format!(
            "steps {steps} exceeds dimension {}",
            problem.dim()
        )));
    }
    let mut x = vec![0.0; problem.dim()];
    let mut support: Vec<usize> = Vec::new();
    let mut iterates = Vec::new();
    let mut deficient = false;
    let mut g0 = None;
    for _ in 0..steps {
        let g = problem.gradient(&x);
        let Some((i, mag)) = argmax_abs(&g, |i| !support.contains(&i)) else {
            break;
        };
        let g0 = *g0.get_or_insert(mag);
        if mag <= ZERO_GRADIENT_RTOL * (1.0 + g0) {
            break;
        }
        support.push(i);
        let (fit, def) = problem.refit(&support)?;
        deficient |= def;
        x = fit;
        iterates.push(x.clone());
    }
    Ok(SparseSolution {
        support,
        coefficients: x,
        rank_deficient: deficient,
        iterates,
    })
}

/// OMP with replacement at fixed support size `sparsity`: each step takes
/// the top gradient coordinate, drops the support coordinate with the
/// smallest `|x_j|` once the support is full, and refits. Stops when the
/// gradient vanishes or a step improves `f` by no more than `eps`, keeping
/// the better of the last two iterates.
pub fn ompr(
    problem: &SparseRegressionProblem,
    sparsity: usize,
    steps: usize,
    eps: f64,
) -> Result<SparseSolution> {
    if sparsity == 0 || sparsity > problem.dim() {
        return Err(Error::InvalidConfig(format!(
            "sparsity must lie in [1, {}], got {sparsity}",
            problem.dim()
        )));
    }
    let mut x = vec![0.0; problem.dim()];
    let mut support: Vec<usize> = Vec::new();
    let mut prev_obj = problem.value(&x);
    let mut iterates = Vec::new();
    let mut deficient = false;
    let mut g0 = None;
    for _ in 0..steps {
        let g = problem.gradient(&x);
        let Some((i, mag)) = argmax_abs(&g, |i| !support.contains(&i)) else {
            break;
        };
        let g0 = *g0.get_or_insert(mag);
        if mag <= ZERO_GRADIENT_RTOL * (1.0 + g0) {
            break;
        }
        let mut next = support.clone();
        if next.len() == sparsity {
            let drop = next
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (k, &j)| {
                    if x[j].abs() < best.1 {
                        (k, x[j].abs())
                    } else {
                        best
                    }
                })
                .0;
            next.remove(drop);
        }
        next.push(i);
        let (fit, def) = problem.refit(&next)?;
        deficient |= def;
        let obj = problem.value(&fit);
        iterates.push(fit.clone());
        if prev_obj - obj <= eps {
            if obj <= prev_obj {
                x = fit;
                support = next;
            }
            break;
        }
        x = fit;
        support = next;
        prev_obj = obj;
    }
    Ok(SparseSolution {
        support,
        coefficients: x,
        rank_deficient: deficient,
        iterates,
    })
}

/// `R(A) = f(diag A) + β/2·‖A − Diag(diag A)‖²_F` over `n×n` matrices.
#[derive(Debug, Clone)]
pub struct LiftedObjective {
    problem: SparseRegressionProblem,
    beta: f64,
    sqrt_beta: f64,
}

/// Lifts `f` to square matrices. The caller is responsible for `β` being
/// at least the restricted smoothness of `f` at the relevant sparsity.
pub fn lift_diagonal(problem: &SparseRegressionProblem, beta: f64) -> Result<LiftedObjective> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "beta must be > 0, got {beta}"
        )));
    }
    Ok(LiftedObjective {
        problem: problem.clone(),
        beta,
        sqrt_beta: beta.sqrt(),
    })
}

impl LiftedObjective {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn problem(&self) -> &SparseRegressionProblem {
        &self.problem
    }

    /// Value on a dense matrix.
    pub fn value_dense(&self, a: &DenseMatrix) -> f64 {
        let n = self.problem.dim();
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        self.problem.value(&diag) + 0.5 * self.beta * off
    }

    /// `Diag(∇f(diag A)) + β·(A − Diag(diag A))`
    pub fn gradient_dense(&self, a: &DenseMatrix) -> DenseMatrix {
        let n = self.problem.dim();
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let g = self.problem.gradient(&diag);
        DenseMatrix::from_fn(
            n,
            n,
            |i, j| if i == j { g[i] } else { self.beta * a[(i, j)] },
        )
    }
}

impl Objective for LiftedObjective {
    fn dims(&self) -> (usize, usize) {
        (self.problem.dim(), self.problem.dim())
    }

    fn value(&self, p: &FactorPair) -> f64 {
        self.value_dense(&p.to_dense())
    }

    fn gradient(&self, p: &FactorPair) -> GradientHandle {
        GradientHandle::Dense(self.gradient_dense(&p.to_dense()))
    }

    fn least_squares(&self) -> Option<&dyn LeastSquaresForm> {
        Some(self)
    }
}

// Residual layout: the `examples` rows of D·diag(A) − y, then √β·A_ij for
// every off-diagonal (i, j) in row-major order.
impl LeastSquaresForm for LiftedObjective {
    fn residual_len(&self) -> usize {
        let n = self.problem.dim();
        self.problem.design.rows() + n * n - n
    }

    fn rhs(&self) -> Vec<f64> {
        let mut b = self.problem.response.clone();
        b.resize(self.residual_len(), 0.0);
        b
    }

    fn forward(&self, qu: &DenseMatrix, y: &DenseMatrix, qv: &DenseMatrix) -> Vec<f64> {
        let a = qu.matmul(y).matmul_t(qv);
        let n = self.problem.dim();
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let mut out = self.problem.design.matvec(&diag);
        out.reserve(n * n - n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    out.push(self.sqrt_beta * a[(i, j)]);
                }
            }
        }
        out
    }

    fn adjoint(&self, w: &[f64], qu: &DenseMatrix, qv: &DenseMatrix) -> DenseMatrix {
        let n = self.problem.dim();
        let p = self.problem.design.rows();
        let diag = self.problem.design.t_matvec(&w[..p]);
        let mut full = DenseMatrix::zeros(n, n);
        let mut k = p;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    full[(i, i)] = diag[i];
                } else {
                    full[(i, j)] = self.sqrt_beta * w[k];
                    k += 1;
                }
            }
        }
        qu.t_matmul(&full.matmul(qv))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivalenceMode {
    /// Greedy against OMP.
    Greedy,
    /// Local Search against OMPR.
    Local,
}

impl std::str::FromStr for EquivalenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Self::Greedy),
            "local" => Ok(Self::Local),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

/// Off-diagonal mass allowed per iterate, relative to `max(1, ‖A‖_F)`.
pub const OFFDIAG_TOL: f64 = 1e-8;
/// Allowed `max_i |A_ii − x_i|`, relative to `max(1, ‖x‖_∞)`.
pub const ITERATE_TOL: f64 = 1e-6;
/// Relative gap between the two largest candidate gradient magnitudes
/// below which a step counts as a near tie: power iteration with
/// [`equivalence_power`] settings cannot reliably separate such
/// coordinates.
pub const TIE_RTOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub mode: EquivalenceMode,
    pub matrix_steps: usize,
    pub vector_steps: usize,
    pub max_offdiag: f64,
    pub max_iterate_gap: f64,
    /// Smallest relative gap between the two largest candidate gradient
    /// magnitudes seen by the vector method.
    pub min_gap: f64,
    /// First violated assertion, if any.
    pub failure: Option<String>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }

    /// Some selection step was not generic; such instances fall outside
    /// the equivalence claim.
    pub fn near_tie(&self) -> bool {
        self.min_gap < TIE_RTOL
    }
}

fn support_of(x: &[f64], scale: f64) -> Vec<usize> {
    (0..x.len())
        .filter(|&i| x[i].abs() > OFFDIAG_TOL * scale)
        .collect()
}

/// Smallest relative gap between the two largest candidate gradient
/// magnitudes over the start point and every iterate.
pub fn min_selection_gap(problem: &SparseRegressionProblem, iterates: &[Vec<f64>]) -> f64 {
    let n = problem.dim();
    let mut x = vec![0.0; n];
    let mut gap = f64::INFINITY;
    for next in std::iter::once(&x.clone()).chain(iterates.iter()) {
        x.clone_from(next);
        let support = support_of(&x, 1.0);
        let mut mags: Vec<f64> = problem
            .gradient(&x)
            .iter()
            .enumerate()
            .filter(|(i, _)| !support.contains(i))
            .map(|(_, g)| g.abs())
            .collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        if mags.len() >= 2 && mags[0] > 0.0 {
            gap = gap.min((mags[0] - mags[1]) / mags[0]);
        }
    }
    gap
}

/// Coefficient-solve tolerance used by the matrix side, so that a refit at
/// the planted minimizer leaves a numerically zero gradient.
pub const EQUIVALENCE_SOLVE_TOL: f64 = 1e-15;

/// Power-iteration settings tight enough to resolve the inserted
/// coordinate to the iterate tolerance.
pub fn equivalence_power() -> PowerConfig {
    PowerConfig {
        max_iters: 20_000,
        tol: 1e-12,
    }
}

/// Runs the matrix method on the lifted objective and the vector method on
/// `f` for `steps` steps and compares every iterate: the matrix iterate
/// must be diagonal, its diagonal must match the vector iterate, and the
/// supports must agree.
pub fn check_equivalence(
    problem: &SparseRegressionProblem,
    beta: f64,
    steps: usize,
    mode: EquivalenceMode,
    seed: u64,
) -> Result<EquivalenceReport> {
    let n = problem.dim();
    let lifted = lift_diagonal(problem, beta)?;
    let mut matrices: Vec<DenseMatrix> = Vec::new();
    let mut record = |_: usize, p: &FactorPair| matrices.push(p.to_dense());

    let mut output = DenseMatrix::zeros(n, n);
    let vector = match mode {
        EquivalenceMode::Greedy => {
            let mut config = SolverConfig::new(steps.max(1)).with_seed(seed);
            config.power = equivalence_power();
            config.inner.full_solve_tol = EQUIVALENCE_SOLVE_TOL;
            if steps > 0 {
                output = greedy_observed(&lifted, &config, &mut record)?
                    .pair
                    .to_dense();
            }
            omp(problem, steps)?
        }
        EquivalenceMode::Local => {
            let s = problem.sparsity.max(1);
            let mut config = SolverConfig::local(s, steps.max(1)).with_seed(seed);
            config.power = equivalence_power();
            config.inner.full_solve_tol = EQUIVALENCE_SOLVE_TOL;
            if steps > 0 {
                output =
                    local_search_from(&lifted, &config, FactorPair::zeros(n, n, s), &mut record)?
                        .pair
                        .to_dense();
            }
            ompr(problem, s, steps, config.eps)?
        }
    };

    let mut report = EquivalenceReport {
        mode,
        matrix_steps: matrices.len(),
        vector_steps: vector.iterates.len(),
        max_offdiag: 0.0,
        max_iterate_gap: 0.0,
        min_gap: min_selection_gap(problem, &vector.iterates),
        failure: None,
    };
    let fail = |msg: String, report: &mut EquivalenceReport| {
        if report.failure.is_none() {
            report.failure = Some(msg);
        }
    };
    // Steps are paired while both sides run. A trailing step taken by only
    // one side (stopping rules see slightly different rounding) is checked
    // through the returned solutions, compared last.
    let common = matrices.len().min(vector.iterates.len());
    let pairs = matrices[..common]
        .iter()
        .zip(&vector.iterates[..common])
        .map(|(a, x)| (a, x.as_slice()))
        .chain(std::iter::once((&output, vector.coefficients.as_slice())));
    for (t, (a, x)) in pairs.enumerate() {
        let t = if t == common {
            "final".to_string()
        } else {
            t.to_string()
        };
        let diag: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        let off = off.sqrt() / a.frobenius_norm().max(1.0);
        report.max_offdiag = report.max_offdiag.max(off);
        if off > OFFDIAG_TOL {
            fail(
                format!("step {t}: off-diagonal mass {off:.3e}"),
                &mut report,
            );
        }
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let gap = diag
            .iter()
            .zip(x)
            .fold(0.0f64, |m, (d, v)| m.max((d - v).abs()))
            / scale;
        report.max_iterate_gap = report.max_iterate_gap.max(gap);
        if gap > ITERATE_TOL {
            fail(
                format!("step {t}: diagonal differs from vector iterate by {gap:.3e}"),
                &mut report,
            );
        }
        if support_of(&diag, scale) != support_of(x, scale) {
            fail(format!("step {t}: supports differ"), &mut report);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormal_design() -> DenseMatrix {
        DenseMatrix::identity(4)
    }

    #[test]
    fn omp_orthonormal_order() {
        let p = SparseRegressionProblem::new(orthonormal_design(), vec![1.0, -4.0, 2.0, 0.5], 4)
            .unwrap();
        let s = omp(&p, 3).unwrap();
        assert_eq!(s.support, vec![1, 2, 0]);
        assert_eq!(s.coefficients, vec![1.0, -4.0, 2.0, 0.0]);
    }

    #[test]
    fn omp_exact_single_column() {
        let raw = DenseMatrix::from_fn(5, 3, |i, j| ((i + 2 * j) % 4) as f64 + 0.5 * j as f64);
        let d = DenseMatrix::from_fn(5, 3, |i, j| raw[(i, j)] / raw.column_norm(j));
        let p = SparseRegressionProblem::planted(d, &[1.0, 0.0, 0.0]).unwrap();
        let s = omp(&p, 3).unwrap();
        assert_eq!(s.support, vec![0]);
        assert!(p.value(&s.coefficients) < 1e-20);
    }

    #[test]
    fn omp_flags_dependent_columns() {
        let d = DenseMatrix::from_row_major(3, 2, vec![1.0, 2.0, 1.0, 2.0, 0.0, 0.0]).unwrap();
        let p = SparseRegressionProblem::new(d, vec![1.0, 0.0, 1.0], 2).unwrap();
        let s = omp(&p, 2).unwrap();
        if s.support.len() == 2 {
            assert!(s.rank_deficient);
        }
    }

    #[test]
    fn ompr_fixed_point_and_full_size() {
        let p =
            SparseRegressionProblem::planted(orthonormal_design(), &[0.0, 3.0, 0.0, -1.0]).unwrap();
        let s = ompr(&p, 2, 5, 0.0).unwrap();
        assert!(p.value(&s.coefficients) < 1e-20);
        let mut sup = s.support.clone();
        sup.sort();
        assert_eq!(sup, vec![1, 3]);

        let d = DenseMatrix::from_fn(6, 3, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let p = SparseRegressionProblem::new(d, vec![1.0, 2.0, 0.0, -1.0, 3.0, 0.5], 3).unwrap();
        let s = ompr(&p, 3, 3, 0.0).unwrap();
        let (full, _) = p.refit(&[0, 1, 2]).unwrap();
        for (a, b) in s.coefficients.iter().zip(&full) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lifted_value_and_gradient() {
        let p = SparseRegressionProblem::new(orthonormal_design(), vec![1.0, 2.0, 3.0, 4.0], 4)
            .unwrap();
        let lifted = lift_diagonal(&p, 2.0).unwrap();
        let diag = DenseMatrix::from_diag(&[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(lifted.value_dense(&diag), p.value(&[1.0, 0.0, 0.0, 1.0]));
        let g = lifted.gradient_dense(&diag);
        assert_eq!(
            g,
            DenseMatrix::from_diag(&p.gradient(&[1.0, 0.0, 0.0, 1.0]))
        );

        let mut off = diag.clone();
        off[(0, 2)] = 0.5;
        let bump = lifted.value_dense(&off) - lifted.value_dense(&diag);
        assert!((bump - 2.0 * 0.25 / 2.0).abs() < 1e-15);
        assert!(lift_diagonal(&p, 0.0).is_err());
    }

    #[test]
    fn zero_response_stays_zero() {
        let p = SparseRegressionProblem::new(orthonormal_design(), vec![0.0; 4], 0).unwrap();
        for mode in [EquivalenceMode::Greedy, EquivalenceMode::Local] {
            let r = check_equivalence(&p, 1.0, 3, mode, 1).unwrap();
            assert!(r.passed(), "{r:?}");
            assert_eq!(r.matrix_steps, 0);
        }
    }
}
