//! Per-rank error curves for the completion experiments, and their
//! aggregation over trials.

use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::baselines::{lambda_grid, soft_impute_path, SoftImputeConfig};
use crate::data::{gen_rpca, std_dev, CompletionInstance, SynthRpcaConfig};
use crate::error::{Error, Result};
use crate::linalg::{FactorPair, SparseObservations};
use crate::metrics::{nmse_on, rmse_on};
use crate::objectives::{ClippedObservedQuadratic, HuberLowRank, Objective, ObservedQuadratic};
use crate::solvers::{
    fast_greedy_observed, fast_local_search, greedy_observed, local_search, IterationTrace,
    SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Greedy,
    Local,
    FastGreedy,
    FastLocal,
    SoftImpute,
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "greedy" => Self::Greedy,
            "local" => Self::Local,
            "fast-greedy" => Self::FastGreedy,
            "fast-local" => Self::FastLocal,
            "softimpute" => Self::SoftImpute,
            other => return Err(Error::InvalidConfig(format!("unknown solver `{other}`"))),
        })
    }
}

/// Number of λ values on the SoftImpute path.
pub const SOFT_IMPUTE_GRID: usize = 10;
/// Outer iterations of plain local search when none are configured.
pub const DEFAULT_LOCAL_ITERS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    /// Target rank, or the solution rank for SoftImpute.
    pub rank: usize,
    pub train_nmse: f64,
    pub test_nmse: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct CurveRun {
    pub points: Vec<CurvePoint>,
    /// `(target_rank, trace)` per solver run; empty for SoftImpute.
    pub traces: Vec<(usize, Vec<IterationTrace>)>,
}

/// Settings shared by one completion experiment.
#[derive(Debug, Clone, Copy)]
pub struct CurveSpec {
    pub solver: SolverKind,
    pub max_rank: usize,
    /// Template for every solver run; `target_rank` is overwritten.
    pub config: SolverConfig,
    /// Iterations for plain local search (`L`).
    pub local_iters: usize,
    /// Record wall-clock seconds; zero otherwise.
    pub timing: bool,
}

fn seconds(start: Instant, timing: bool) -> f64 {
    if timing {
        start.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

/// Train/test NMSE for ranks `1..=max_rank`.
///
/// Greedy variants take one run to `max_rank` and read off every prefix; if
/// a run stops early its last solution stands for the remaining ranks.
/// Local variants take one run per rank. SoftImpute yields one point per λ
/// on a decreasing geometric grid, each warm-started from the previous.
pub fn completion_curve(inst: &CompletionInstance, spec: &CurveSpec) -> Result<CurveRun> {
    let obj = ObservedQuadratic::new(inst.observed.clone());
    let eval = |p: &FactorPair| -> Result<(f64, f64)> {
        Ok((nmse_on(p, &inst.observed)?, nmse_on(p, &inst.heldout)?))
    };
    let mut points = Vec::new();
    let mut traces = Vec::new();
    match spec.solver {
        SolverKind::Greedy | SolverKind::FastGreedy => {
            let config = SolverConfig {
                target_rank: spec.max_rank,
                ..spec.config
            };
            let start = Instant::now();
            let mut snapshots: Vec<(FactorPair, f64)> = Vec::new();
            let mut observe =
                |_: usize, p: &FactorPair| snapshots.push((p.clone(), seconds(start, spec.timing)));
            let run = if spec.solver == SolverKind::Greedy {
                greedy_observed(&obj, &config, &mut observe)?
            } else {
                fast_greedy_observed(&obj, &config, &mut observe)?
            };
            let last = (run.pair.clone(), snapshots.last().map_or(0.0, |s| s.1));
            for k in 1..=spec.max_rank {
                let (p, secs) = snapshots.get(k - 1).unwrap_or(&last);
                let (train, test) = eval(p)?;
                points.push(CurvePoint {
                    rank: k,
                    train_nmse: train,
                    test_nmse: test,
                    seconds: *secs,
                });
            }
            traces.push((spec.max_rank, run.traces));
        }
        SolverKind::Local | SolverKind::FastLocal => {
            for k in 1..=spec.max_rank {
                let start = Instant::now();
                let run = if spec.solver == SolverKind::Local {
                    let config = SolverConfig {
                        target_rank: k,
                        max_outer_iters: spec.local_iters,
                        ..spec.config
                    };
                    local_search(&obj, &config)?
                } else {
                    let config = SolverConfig {
                        target_rank: k,
                        ..spec.config
                    };
                    fast_local_search(&obj, &config)?
                };
                let secs = seconds(start, spec.timing);
                let (train, test) = eval(&run.pair)?;
                points.push(CurvePoint {
                    rank: k,
                    train_nmse: train,
                    test_nmse: test,
                    seconds: secs,
                });
                traces.push((k, run.traces));
            }
        }
        SolverKind::SoftImpute => {
            let start = Instant::now();
            let grid = lambda_grid(&inst.observed, SOFT_IMPUTE_GRID)?;
            let path = soft_impute_path(
                &inst.observed,
                &grid,
                &SoftImputeConfig::new(0.0, spec.max_rank),
            )?;
            let secs = seconds(start, spec.timing);
            for fit in &path {
                let (train, test) = eval(&fit.pair)?;
                points.push(CurvePoint {
                    rank: fit.pair.rank(),
                    train_nmse: train,
                    test_nmse: test,
                    seconds: secs,
                });
            }
        }
    }
    Ok(CurveRun { points, traces })
}

/// Runs one rank solver (not SoftImpute) at `config.target_rank`.
pub fn solve_with(
    solver: SolverKind,
    objective: &dyn Objective,
    config: &SolverConfig,
) -> Result<crate::solvers::SolveResult> {
    match solver {
        SolverKind::Greedy => crate::solvers::greedy(objective, config),
        SolverKind::FastGreedy => crate::solvers::fast_greedy(objective, config),
        SolverKind::Local => local_search(objective, config),
        SolverKind::FastLocal => fast_local_search(objective, config),
        SolverKind::SoftImpute => Err(Error::InvalidConfig(
            "softimpute is only available for completion".into(),
        )),
    }
}

#[derive(Debug, Clone)]
pub struct RpcaOutcome {
    /// `‖L − L₀‖_F / ‖L₀‖_F`
    pub relative_error: f64,
    /// Huber threshold actually used.
    pub delta: f64,
    pub objective: f64,
    pub pair: FactorPair,
    pub traces: Vec<IterationTrace>,
}

/// Generates a corrupted low-rank matrix and recovers `L` by minimizing the
/// Huber loss at rank `config.target_rank`. With `delta_relative`, `delta`
/// is read in units of `sd(L₀)`.
pub fn rpca_recovery(
    data: &SynthRpcaConfig,
    delta: f64,
    delta_relative: bool,
    solver: SolverKind,
    config: &SolverConfig,
) -> Result<RpcaOutcome> {
    let inst = gen_rpca(data)?;
    let truth = inst.truth_low.to_dense();
    let delta = if delta_relative {
        delta * std_dev(truth.as_slice())
    } else {
        delta
    };
    let objective = HuberLowRank::new(inst.corrupted, delta)?;
    let run = solve_with(solver, &objective, config)?;
    let denom = truth.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(RpcaOutcome {
        relative_error: run.pair.to_dense().sub(&truth).frobenius_norm() / denom,
        delta,
        objective: objective.value(&run.pair),
        pair: run.pair,
        traces: run.traces,
    })
}

#[derive(Debug, Clone)]
pub struct RatingsOutcome {
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub traces: Vec<IterationTrace>,
}

/// Fits one train/test split. With `clip`, insertion uses the clipped
/// gradient and predictions are clamped before scoring.
pub fn ratings_fit(
    train: &SparseObservations,
    test: &SparseObservations,
    clip: Option<(f64, f64)>,
    solver: SolverKind,
    config: &SolverConfig,
) -> Result<RatingsOutcome> {
    let run = match clip {
        Some((lo, hi)) => {
            let objective = ClippedObservedQuadratic::new(train.clone(), lo, hi)?;
            let config = SolverConfig {
                clipped_insertion: true,
                ..*config
            };
            solve_with(solver, &objective, &config)?
        }
        None => solve_with(solver, &ObservedQuadratic::new(train.clone()), config)?,
    };
    Ok(RatingsOutcome {
        train_rmse: rmse_on(&run.pair, train, clip)?,
        test_rmse: rmse_on(&run.pair, test, clip)?,
        traces: run.traces,
    })
}

/// Mean and standard error (sample standard deviation over `√n`).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryPoint {
    /// Position on the curve (rank for the rank solvers, λ index for
    /// SoftImpute).
    pub index: usize,
    pub rank_mean: f64,
    pub train_nmse_mean: f64,
    pub train_nmse_stderr: f64,
    pub test_nmse_mean: f64,
    pub test_nmse_stderr: f64,
    pub seconds_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSummary {
    pub trials: usize,
    pub curve: Vec<SummaryPoint>,
    /// Lowest mean test NMSE along the curve.
    pub best_test_nmse: f64,
    pub best_test_nmse_stderr: f64,
    /// Mean rank at the best point.
    pub best_rank: f64,
    pub best_index: usize,
}

/// Averages curves point by point across trials.
pub fn summarize(runs: &[Vec<CurvePoint>]) -> Result<CurveSummary> {
    let len = runs.first().map_or(0, |r| r.len());
    if len == 0 || runs.iter().any(|r| r.len() != len) {
        return Err(Error::InvalidConfig(
            "summaries need nonempty curves of equal length".into(),
        ));
    }
    let column = |k: usize, f: fn(&CurvePoint) -> f64| -> Vec<f64> {
        runs.iter().map(|r| f(&r[k])).collect()
    };
    let mut curve = Vec::with_capacity(len);
    for k in 0..len {
        let (rank_mean, _) = mean_stderr(&column(k, |p| p.rank as f64));
        let (train_m, train_s) = mean_stderr(&column(k, |p| p.train_nmse));
        let (test_m, test_s) = mean_stderr(&column(k, |p| p.test_nmse));
        let (sec_m, _) = mean_stderr(&column(k, |p| p.seconds));
        curve.push(SummaryPoint {
            index: k,
            rank_mean,
            train_nmse_mean: train_m,
            train_nmse_stderr: train_s,
            test_nmse_mean: test_m,
            test_nmse_stderr: test_s,
            seconds_mean: sec_m,
        });
    }
    let best = curve
        .iter()
        .min_by(|a, b| a.test_nmse_mean.total_cmp(&b.test_nmse_mean))
        .expect("nonempty")
        .clone();
    Ok(CurveSummary {
        trials: runs.len(),
        best_test_nmse: best.test_nmse_mean,
        best_test_nmse_stderr: best.test_nmse_stderr,
        best_rank: best.rank_mean,
        best_index: best.index,
        curve,
    })
}
