//! Inner re-fitting steps run after every rank-1 insertion.
//!
//! [`optimize_full`] solves `min_X R(U·X·Vᵀ)` over the column spans of both
//! factors. [`optimize_fast`] re-solves one factor with the other frozen;
//! for the observed-entry quadratic that is a least-squares problem that
//! decouples by row, run for a capped number of LSQR iterations
//! warm-started at the current factor.

mod kernels;

pub use kernels::{cgls, lbfgs, lsqr, KernelOutcome, LbfgsSettings};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, span_basis, DenseMatrix, FactorPair, SparseObservations};
use crate::objectives::Objective;
use crate::par;

/// Relative tolerance for the capped LSQR early exit. Only a numerically
/// exact solve triggers it, so capped runs perform every iteration.
const LSQR_TOL: f64 = 1e-14;
const ARMIJO: f64 = 1e-4;
const FULL_LBFGS_ITERS: usize = 500;

/// How the capped least-squares solve in [`optimize_fast`] is organized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LsqrScope {
    /// One LSQR run over all rows of the free factor at once.
    #[default]
    Joint,
    /// An independent LSQR run per row of the free factor.
    PerRow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    /// LSQR iteration cap in [`optimize_fast`].
    pub ls_iters: usize,
    pub ls_scope: LsqrScope,
    /// Relative normal-residual tolerance of the full coefficient solve.
    pub full_solve_tol: f64,
    /// Quasi-Newton iterations per one-sided solve for objectives without
    /// the per-row decomposition.
    pub grad_inner_iters: usize,
    /// Quasi-Newton memory.
    pub grad_memory: usize,
    /// Solve independent rows on the thread pool when the `parallel`
    /// feature is enabled. Results are identical either way.
    pub parallel: bool,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            ls_iters: 3,
            ls_scope: LsqrScope::Joint,
            full_solve_tol: 1e-10,
            grad_inner_iters: 10,
            grad_memory: 5,
            parallel: true,
        }
    }
}

impl InnerConfig {
    /// Per-row solves with a cap large enough that every system is solved
    /// to working precision.
    pub fn full_accuracy() -> Self {
        Self {
            ls_iters: 500,
            ls_scope: LsqrScope::PerRow,
            ..Self::default()
        }
    }

    pub fn with_scope(mut self, ls_scope: LsqrScope) -> Self {
        self.ls_scope = ls_scope;
        self
    }

    pub fn with_ls_iters(mut self, ls_iters: usize) -> Self {
        self.ls_iters = ls_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.ls_iters == 0 || self.grad_inner_iters == 0 || self.grad_memory == 0 {
            return Err(Error::InvalidConfig(
                "inner iteration counts must be >= 1".into(),
            ));
        }
        if !(self.full_solve_tol > 0.0) {
            return Err(Error::InvalidConfig("full_solve_tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    pub pair: FactorPair,
    /// False when an iterative solve stopped on its cap before its
    /// tolerance (full solve only; capped one-sided solves report true).
    pub converged: bool,
    pub iterations: usize,
}

/// `R(U·Vᵀ)`
pub fn objective_after_inner(pair: &FactorPair, objective: &dyn Objective) -> f64 {
    objective.value(pair)
}

/// Minimizes `R` over all matrices `Qu·Y·Qvᵀ`, where `Qu`, `Qv` are
/// orthonormal bases of `im(U)` and `im(V)`. This is the same optimum as
/// `min_X R(U·X·Vᵀ)`, solved in well-conditioned coordinates.
///
/// The result keeps width `r`: the left factor is `Qu·Y`, the right factor
/// is `Qv`, and any columns beyond `dim im(V)` are zero.
///
/// Objectives with a least-squares form are solved by CGLS from zero (the
/// minimum-norm solution on singular systems), capped at `10·k²`
/// iterations for `k²` unknowns. Other objectives use L-BFGS warm-started
/// at the current matrix.
pub fn optimize_full(
    pair: &FactorPair,
    objective: &dyn Objective,
    config: &InnerConfig,
) -> Result<InnerOutcome> {
    check_pair(pair, objective)?;
    let (m, n, r) = (pair.rows(), pair.cols(), pair.rank());
    let (qu, cu) = span_basis(pair.u())?;
    let (qv, cv) = span_basis(pair.v())?;
    let (ku, kv) = (qu.cols(), qv.cols());
    if ku == 0 || kv == 0 {
        return Ok(InnerOutcome {
            pair: FactorPair::zeros(m, n, r),
            converged: true,
            iterations: 0,
        });
    }

    let (y, converged, iterations) = if let Some(ls) = objective.least_squares() {
        let b = ls.rhs();
        let out = cgls(
            ls.residual_len(),
            ku * kv,
            |x, out| {
                let y = DenseMatrix::from_row_major(ku, kv, x.to_vec()).expect("shape");
                out.copy_from_slice(&ls.forward(&qu, &y, &qv));
            },
            |w, out| out.copy_from_slice(ls.adjoint(w, &qu, &qv).as_slice()),
            &b,
            10 * ku * kv,
            config.full_solve_tol,
        );
        (out.x, out.converged, out.iterations)
    } else {
        // current matrix in basis coordinates: (Cu)(Cv)ᵀ
        let y0 = cu.matmul_t(&cv).into_vec();
        let out = lbfgs(
            y0,
            |x, g| {
                let y = DenseMatrix::from_row_major(ku, kv, x.to_vec()).expect("shape");
                let p = FactorPair::new(qu.matmul(&y), qv.clone()).expect("widths");
                let grad = objective.gradient(&p).sandwich(&qu, &qv);
                g.copy_from_slice(grad.as_slice());
                objective.value(&p)
            },
            LbfgsSettings {
                max_iters: FULL_LBFGS_ITERS,
                memory: config.grad_memory,
                armijo: ARMIJO,
                grad_tol: config.full_solve_tol,
            },
        );
        (out.x, out.converged, out.iterations)
    };

    let y = DenseMatrix::from_row_major(ku, kv, y)?;
    let left = qu.matmul(&y);
    let u = DenseMatrix::from_fn(m, r, |i, j| if j < kv { left[(i, j)] } else { 0.0 });
    let v = DenseMatrix::from_fn(n, r, |i, j| if j < kv { qv[(i, j)] } else { 0.0 });
    Ok(InnerOutcome {
        pair: FactorPair::new(u, v)?,
        converged,
        iterations,
    })
}

/// One alternating step: even `t` re-solves `U` with `V` fixed, odd `t`
/// re-solves `V` with `U` fixed.
///
/// With an observed-entry target the free factor solves a least-squares
/// problem over the observed entries, starting from its current value and
/// capped at `config.ls_iters` LSQR iterations, either as one system
/// ([`LsqrScope::Joint`]) or one system per row ([`LsqrScope::PerRow`]).
/// Rows with no observations are left unchanged. Other objectives take
/// `config.grad_inner_iters` L-BFGS steps on the whole free factor.
pub fn optimize_fast(
    pair: &FactorPair,
    t: usize,
    objective: &dyn Objective,
    config: &InnerConfig,
) -> Result<InnerOutcome> {
    check_pair(pair, objective)?;
    config.validate()?;
    if pair.rank() == 0 {
        return Ok(InnerOutcome {
            pair: pair.clone(),
            converged: true,
            iterations: 0,
        });
    }
    let update_u = t.is_multiple_of(2);

    if let Some(target) = objective.observed_target() {
        let new = if update_u {
            pair.with_u(solve_side(pair.u(), pair.v(), target, Side::Rows, config))
        } else {
            pair.with_v(solve_side(
                pair.v(),
                pair.u(),
                target,
                Side::Columns,
                config,
            ))
        };
        return Ok(InnerOutcome {
            pair: new,
            converged: true,
            iterations: config.ls_iters,
        });
    }

    let settings = LbfgsSettings {
        max_iters: config.grad_inner_iters,
        memory: config.grad_memory,
        armijo: ARMIJO,
        grad_tol: 0.0,
    };
    let r = pair.rank();
    let new = if update_u {
        let v = pair.v().clone();
        let m = pair.rows();
        let out = lbfgs(
            pair.u().as_slice().to_vec(),
            |x, g| {
                let p = FactorPair::new(
                    DenseMatrix::from_row_major(m, r, x.to_vec()).expect("shape"),
                    v.clone(),
                )
                .expect("widths");
                g.copy_from_slice(objective.gradient(&p).times(&v).as_slice());
                objective.value(&p)
            },
            settings,
        );
        pair.with_u(DenseMatrix::from_row_major(m, r, out.x)?)
    } else {
        let u = pair.u().clone();
        let n = pair.cols();
        let out = lbfgs(
            pair.v().as_slice().to_vec(),
            |x, g| {
                let p = FactorPair::new(
                    u.clone(),
                    DenseMatrix::from_row_major(n, r, x.to_vec()).expect("shape"),
                )
                .expect("widths");
                g.copy_from_slice(objective.gradient(&p).t_times(&u).as_slice());
                objective.value(&p)
            },
            settings,
        );
        pair.with_v(DenseMatrix::from_row_major(n, r, out.x)?)
    };
    Ok(InnerOutcome {
        pair: new,
        converged: true,
        iterations: config.grad_inner_iters,
    })
}

#[derive(Clone, Copy)]
enum Side {
    Rows,
    Columns,
}

fn solve_rows(
    free: &DenseMatrix,
    fixed: &DenseMatrix,
    target: &SparseObservations,
    side: Side,
    config: &InnerConfig,
) -> DenseMatrix {
    let r = free.cols();
    let values = target.values();
    let other = |e: usize| match side {
        Side::Rows => target.col_index(e),
        Side::Columns => target.row_index(e),
    };
    let mut out = free.clone();
    par::for_each_row(out.as_mut_slice(), r, config.parallel, |i, row| {
        let entries = match side {
            Side::Rows => target.row_entries(i),
            Side::Columns => target.column_entries(i),
        };
        if entries.is_empty() {
            return;
        }
        let rhs: Vec<f64> = entries
            .iter()
            .map(|&e| values[e] - dot(fixed.row(other(e)), row))
            .collect();
        let step = lsqr(
            entries.len(),
            r,
            |x, y| {
                for (yt, &e) in y.iter_mut().zip(entries) {
                    *yt = dot(fixed.row(other(e)), x);
                }
            },
            |y, x| {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (&yt, &e) in y.iter().zip(entries) {
                    axpy(yt, fixed.row(other(e)), x);
                }
            },
            &rhs,
            config.ls_iters,
            LSQR_TOL,
        );
        axpy(1.0, &step.x, row);
    });
    out
}

fn solve_side(
    free: &DenseMatrix,
    fixed: &DenseMatrix,
    target: &SparseObservations,
    side: Side,
    config: &InnerConfig,
) -> DenseMatrix {
    match config.ls_scope {
        LsqrScope::Joint => solve_joint(free, fixed, target, side, config),
        LsqrScope::PerRow => solve_rows(free, fixed, target, side, config),
    }
}

// One LSQR run on the block-diagonal system for all rows of the free factor.
// Residuals are laid out grouped by free row so both products split into
// disjoint per-row segments.
fn solve_joint(
    free: &DenseMatrix,
    fixed: &DenseMatrix,
    target: &SparseObservations,
    side: Side,
    config: &InnerConfig,
) -> DenseMatrix {
    let r = free.cols();
    let n_free = free.rows();
    let values = target.values();
    let group = |i: usize| match side {
        Side::Rows => target.row_entries(i),
        Side::Columns => target.column_entries(i),
    };
    let other = |e: usize| match side {
        Side::Rows => target.col_index(e),
        Side::Columns => target.row_index(e),
    };
    let mut offsets = Vec::with_capacity(n_free + 1);
    offsets.push(0);
    for i in 0..n_free {
        offsets.push(offsets[i] + group(i).len());
    }

    let mut rhs = vec![0.0; target.len()];
    par::for_each_segment(&mut rhs, &offsets, config.parallel, |i, seg| {
        for (y, &e) in seg.iter_mut().zip(group(i)) {
            *y = values[e] - dot(fixed.row(other(e)), free.row(i));
        }
    });
    let step = lsqr(
        target.len(),
        n_free * r,
        |x, y| {
            par::for_each_segment(y, &offsets, config.parallel, |i, seg| {
                let xi = &x[i * r..(i + 1) * r];
                for (yt, &e) in seg.iter_mut().zip(group(i)) {
                    *yt = dot(fixed.row(other(e)), xi);
                }
            })
        },
        |y, x| {
            par::for_each_row(x, r, config.parallel, |i, xi| {
                xi.iter_mut().for_each(|v| *v = 0.0);
                for (&yt, &e) in y[offsets[i]..offsets[i + 1]].iter().zip(group(i)) {
                    axpy(yt, fixed.row(other(e)), xi);
                }
            })
        },
        &rhs,
        config.ls_iters,
        LSQR_TOL,
    );
    let mut out = free.clone();
    axpy(1.0, &step.x, out.as_mut_slice());
    out
}

fn check_pair(pair: &FactorPair, objective: &dyn Objective) -> Result<()> {
    let (m, n) = objective.dims();
    pair.check_dims(m, n)
}
