//! Outer loops: Greedy, Local Search, and their fast variants.
//!
//! All four grow or refresh a factored iterate one rank-1 term at a time.
//! The inserted term is the top singular pair of the gradient, found by
//! seeded power iteration (seed mixed with the outer iteration index).

use std::time::Instant;

use crate::error::{Error, Result};
use crate::inner::{optimize_fast, optimize_full, InnerConfig, InnerOutcome};
use crate::linalg::{
    factored_svd, mix_seed, span_basis, spectral_norm_estimate, svd, top_singular_triplet,
    DenseMatrix, FactorPair, PowerConfig, SingularTriplet, SPAN_TOL,
};
use crate::objectives::{GradientHandle, Objective};

/// Relative threshold under which the gradient counts as zero.
pub const ZERO_GRADIENT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub target_rank: usize,
    /// Iteration budget `L` for local search, and the safety cap on the
    /// do-while loop of fast local search.
    pub max_outer_iters: usize,
    /// Absolute objective-improvement slack for the local-search stopping
    /// rules.
    pub eps: f64,
    pub inner: InnerConfig,
    pub seed: u64,
    /// Pick the inserted term from [`Objective::insertion_gradient`]
    /// (e.g. clipped predictions) instead of the true gradient.
    pub clipped_insertion: bool,
    pub power: PowerConfig,
}

impl SolverConfig {
    pub fn new(target_rank: usize) -> Self {
        Self {
            target_rank,
            max_outer_iters: 1000,
            eps: 0.0,
            inner: InnerConfig::default(),
            seed: 0,
            clipped_insertion: false,
            power: PowerConfig::default(),
        }
    }

    /// Defaults for [`local_search`]: `L` iterations, `eps = 1e-10`.
    pub fn local(target_rank: usize, max_outer_iters: usize) -> Self {
        Self {
            max_outer_iters,
            eps: 1e-10,
            ..Self::new(target_rank)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_inner(mut self, inner: InnerConfig) -> Self {
        self.inner = inner;
        self
    }

    fn validate(&self, dims: (usize, usize)) -> Result<()> {
        if self.target_rank == 0 {
            return Err(Error::InvalidConfig("target_rank must be >= 1".into()));
        }
        if self.target_rank > dims.0.min(dims.1) {
            return Err(Error::InvalidConfig(format!(
                "target_rank {} exceeds min(m, n) = {}",
                self.target_rank,
                dims.0.min(dims.1)
            )));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidConfig("eps must be >= 0".into()));
        }
        self.inner.validate()
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub iter: usize,
    /// Width of the factors after the iteration.
    pub rank: usize,
    pub objective: f64,
    pub top_sigma: f64,
    pub truncated_column: Option<usize>,
    pub wall_nanos: u128,
    pub power_converged: bool,
    pub inner_converged: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub pair: FactorPair,
    pub traces: Vec<IterationTrace>,
}

/// Called with `(iteration, pair)` after each inner solve.
pub type Observer<'a> = &'a mut dyn FnMut(usize, &FactorPair);

fn insertion(
    objective: &dyn Objective,
    config: &SolverConfig,
    pair: &FactorPair,
    t: usize,
) -> Result<(SingularTriplet, bool)> {
    let grad: GradientHandle = if config.clipped_insertion {
        objective.insertion_gradient(pair)
    } else {
        objective.gradient(pair)
    };
    let out = top_singular_triplet(
        grad.as_operator(),
        mix_seed(config.seed, t as u64),
        config.power.max_iters,
        config.power.tol,
    )?;
    Ok((out.triplet, out.converged))
}

fn is_zero_gradient(sigma: f64, sigma0: f64) -> bool {
    sigma <= ZERO_GRADIENT_RTOL * (1.0 + sigma0)
}

#[derive(Clone, Copy)]
enum Refit {
    Full,
    Fast,
}

fn refit(
    how: Refit,
    pair: &FactorPair,
    t: usize,
    objective: &dyn Objective,
    inner: &InnerConfig,
) -> Result<InnerOutcome> {
    match how {
        Refit::Full => optimize_full(pair, objective, inner),
        Refit::Fast => optimize_fast(pair, t, objective, inner),
    }
}

fn greedy_loop(
    objective: &dyn Objective,
    config: &SolverConfig,
    how: Refit,
    observer: Observer<'_>,
) -> Result<SolveResult> {
    let (m, n) = objective.dims();
    config.validate((m, n))?;
    let mut pair = FactorPair::empty(m, n);
    let mut traces = Vec::with_capacity(config.target_rank);
    let mut sigma0 = None;
    for t in 0..config.target_rank {
        let start = Instant::now();
        let (trip, power_converged) = insertion(objective, config, &pair, t)?;
        let s0 = *sigma0.get_or_insert(trip.sigma);
        if is_zero_gradient(trip.sigma, s0) {
            break;
        }
        let grown = pair.append(&trip.u, &trip.v);
        let out = refit(how, &grown, t, objective, &config.inner)?;
        pair = out.pair;
        observer(t, &pair);
        traces.push(IterationTrace {
            iter: t,
            rank: pair.rank(),
            objective: objective.value(&pair),
            top_sigma: trip.sigma,
            truncated_column: None,
            wall_nanos: start.elapsed().as_nanos(),
            power_converged,
            inner_converged: out.converged,
        });
    }
    Ok(SolveResult { pair, traces })
}

/// Greedy rank-1 pursuit with the full inner solve after each insertion.
pub fn greedy(objective: &dyn Objective, config: &SolverConfig) -> Result<SolveResult> {
    greedy_loop(objective, config, Refit::Full, &mut |_, _| {})
}

pub fn greedy_observed(
    objective: &dyn Objective,
    config: &SolverConfig,
    observer: Observer<'_>,
) -> Result<SolveResult> {
    greedy_loop(objective, config, Refit::Full, observer)
}

/// Greedy with the one-sided alternating inner step; `t` is the outer
/// counter, so `U` is refit first.
pub fn fast_greedy(objective: &dyn Objective, config: &SolverConfig) -> Result<SolveResult> {
    greedy_loop(objective, config, Refit::Fast, &mut |_, _| {})
}

pub fn fast_greedy_observed(
    objective: &dyn Objective,
    config: &SolverConfig,
    observer: Observer<'_>,
) -> Result<SolveResult> {
    greedy_loop(objective, config, Refit::Fast, observer)
}

/// `H_{r−1}(U·Vᵀ)` as `(U'·Σ', V')` of width `r − 1`. Components with a
/// numerically zero singular value are stored as zero columns in both
/// factors.
pub fn truncate_svd(pair: &FactorPair) -> Result<FactorPair> {
    let r = pair.rank();
    if r == 0 {
        return Err(Error::InvalidConfig("cannot truncate a rank-0 pair".into()));
    }
    let (m, n) = (pair.rows(), pair.cols());
    let dec = factored_svd(pair)?;
    let top = dec.sigma.first().copied().unwrap_or(0.0);
    let keep = dec
        .sigma
        .iter()
        .take(r - 1)
        .filter(|&&s| s > SPAN_TOL * top && s > 0.0)
        .count();
    let u = DenseMatrix::from_fn(m, r - 1, |i, j| {
        if j < keep {
            dec.u[(i, j)] * dec.sigma[j]
        } else {
            0.0
        }
    });
    let v = DenseMatrix::from_fn(n, r - 1, |i, j| if j < keep { dec.v[(i, j)] } else { 0.0 });
    FactorPair::new(u, v)
}

/// Drops the column pair minimizing `‖U·eᵢ‖·‖V·eᵢ‖` (lowest index on ties).
pub fn truncate_fast(pair: &FactorPair) -> Result<(FactorPair, usize)> {
    let r = pair.rank();
    if r == 0 {
        return Err(Error::InvalidConfig("cannot truncate a rank-0 pair".into()));
    }
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for i in 0..r {
        let val = pair.u().column_norm(i) * pair.v().column_norm(i);
        if val < best_val {
            best = i;
            best_val = val;
        }
    }
    Ok((pair.remove_column(best), best))
}

/// Local search from all-zero factors of width `target_rank`, for
/// `max_outer_iters` iterations: insert the gradient's top pair, drop the
/// smallest singular value, refit fully.
pub fn local_search(objective: &dyn Objective, config: &SolverConfig) -> Result<SolveResult> {
    let (m, n) = objective.dims();
    local_search_from(
        objective,
        config,
        FactorPair::zeros(m, n, config.target_rank),
        &mut |_, _| {},
    )
}

/// Local search from a given iterate of width `config.target_rank`.
///
/// Stops after `max_outer_iters` iterations, when the gradient vanishes, or
/// when an iteration improves the objective by no more than `eps`. In the
/// last case the better of the two final iterates is returned.
pub fn local_search_from(
    objective: &dyn Objective,
    config: &SolverConfig,
    init: FactorPair,
    observer: Observer<'_>,
) -> Result<SolveResult> {
    let (m, n) = objective.dims();
    config.validate((m, n))?;
    init.check_dims(m, n)?;
    if init.rank() != config.target_rank {
        return Err(Error::InvalidConfig(format!(
            "initial factors have width {}, target rank is {}",
            init.rank(),
            config.target_rank
        )));
    }
    if config.max_outer_iters == 0 {
        return Err(Error::InvalidConfig("max_outer_iters must be >= 1".into()));
    }
    let mut pair = init;
    let mut prev_obj = objective.value(&pair);
    let mut traces = Vec::new();
    let mut sigma0 = None;
    for t in 0..config.max_outer_iters {
        let start = Instant::now();
        let (trip, power_converged) = insertion(objective, config, &pair, t)?;
        let s0 = *sigma0.get_or_insert(trip.sigma);
        if is_zero_gradient(trip.sigma, s0) {
            break;
        }
        let reduced = truncate_svd(&pair)?;
        let grown = reduced.append(&trip.u, &trip.v);
        let out = optimize_full(&grown, objective, &config.inner)?;
        let obj = objective.value(&out.pair);
        observer(t, &out.pair);
        traces.push(IterationTrace {
            iter: t,
            rank: out.pair.rank(),
            objective: obj,
            top_sigma: trip.sigma,
            truncated_column: None,
            wall_nanos: start.elapsed().as_nanos(),
            power_converged,
            inner_converged: out.converged,
        });
        let improved = prev_obj - obj;
        if improved <= config.eps {
            if obj <= prev_obj {
                pair = out.pair;
            }
            break;
        }
        pair = out.pair;
        prev_obj = obj;
    }
    Ok(SolveResult { pair, traces })
}

/// Fast local search: start from [`fast_greedy`], then repeat
/// insert / drop-smallest-column / one-sided refit while the objective
/// strictly decreases (by more than `eps`). Returns the last improving
/// iterate. The trace's final entry is the rejected step.
pub fn fast_local_search(objective: &dyn Objective, config: &SolverConfig) -> Result<SolveResult> {
    fast_local_search_observed(objective, config, &mut |_, _| {})
}

pub fn fast_local_search_observed(
    objective: &dyn Objective,
    config: &SolverConfig,
    observer: Observer<'_>,
) -> Result<SolveResult> {
    let init = greedy_loop(objective, config, Refit::Fast, observer)?;
    let mut pair = init.pair;
    let mut traces = init.traces;
    if pair.rank() == 0 {
        return Ok(SolveResult { pair, traces });
    }
    let mut prev_obj = objective.value(&pair);
    for t in (traces.len()..).take(config.max_outer_iters) {
        let start = Instant::now();
        let (trip, power_converged) = insertion(objective, config, &pair, t)?;
        if trip.sigma == 0.0 {
            break;
        }
        let (reduced, removed) = truncate_fast(&pair)?;
        let grown = reduced.append(&trip.u, &trip.v);
        let out = optimize_fast(&grown, t, objective, &config.inner)?;
        let obj = objective.value(&out.pair);
        traces.push(IterationTrace {
            iter: t,
            rank: out.pair.rank(),
            objective: obj,
            top_sigma: trip.sigma,
            truncated_column: Some(removed),
            wall_nanos: start.elapsed().as_nanos(),
            power_converged,
            inner_converged: out.converged,
        });
        if !(obj < prev_obj - config.eps) {
            break;
        }
        pair = out.pair;
        prev_obj = obj;
    }
    Ok(SolveResult { pair, traces })
}

/// `max |uᵀ·∇R(A)·v| / (1 + ‖∇R(A)‖₂)` over unit `u ∈ im(U)`, `v ∈ im(V)`.
/// Zero at an exact optimum of the full inner problem.
pub fn span_gradient_residual(pair: &FactorPair, objective: &dyn Objective) -> Result<f64> {
    let grad = objective.gradient(pair);
    let (qu, _) = span_basis(pair.u())?;
    let (qv, _) = span_basis(pair.v())?;
    if qu.cols() == 0 || qv.cols() == 0 {
        return Ok(0.0);
    }
    let core = grad.sandwich(&qu, &qv);
    let top = svd(&core)?.sigma.first().copied().unwrap_or(0.0);
    let gnorm = spectral_norm_estimate(grad.as_operator(), 0x5eed)?;
    Ok(top / (1.0 + gnorm))
}
