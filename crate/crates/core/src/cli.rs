//! Command-line experiment runner.
//!
//! Every subcommand writes its main table as CSV (stdout unless `--out`)
//! and a JSON summary (stderr unless `--json`). Wall-clock columns are zero
//! unless `--timing` is passed, so repeated runs produce identical bytes.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::data::{gen_completion, load_movielens, split_ratings, RatingsFormat};
use crate::data::{SynthCompletionConfig, SynthRpcaConfig};
use crate::error::{Error, Result};
use crate::experiments::{
    completion_curve, mean_stderr, ratings_fit, rpca_recovery, summarize, CurvePoint, CurveSpec,
    SolverKind, DEFAULT_LOCAL_ITERS,
};
use crate::inner::{InnerConfig, LsqrScope};
use crate::par::{configure_threads_from_env, map_indices};
use crate::solvers::{IterationTrace, SolverConfig};
use crate::sparse_equiv::{check_equivalence, planted_instance, DesignKind, EquivalenceMode};

pub const COMPLETION_HEADER: [&str; 5] = ["trial", "rank", "train_nmse", "test_nmse", "seconds"];
pub const RPCA_HEADER: [&str; 5] = ["iter", "rank", "objective", "top_sigma", "seconds"];
pub const RATINGS_HEADER: [&str; 4] = ["split", "train_rmse", "test_rmse", "seconds"];
pub const TRACE_HEADER: [&str; 10] = [
    "trial",
    "target_rank",
    "iter",
    "rank",
    "objective",
    "top_sigma",
    "truncated_column",
    "power_converged",
    "inner_converged",
    "seconds",
];

#[derive(Debug, Parser)]
#[command(
    name = "lowrank",
    version,
    about = "Greedy and local-search solvers for rank-constrained problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthetic matrix completion: per-rank train/test NMSE.
    SynthComplete(SynthArgs),
    /// Synthetic robust PCA with the Huber loss.
    RpcaSynth(RpcaArgs),
    /// Rating prediction on a MovieLens file.
    Recsys(RecsysArgs),
    /// Check Greedy/OMP or Local Search/OMPR on a sparse regression.
    Equivalence(EquivalenceArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Greedy,
    Local,
    FastGreedy,
    FastLocal,
    Softimpute,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Greedy => SolverKind::Greedy,
            SolverArg::Local => SolverKind::Local,
            SolverArg::FastGreedy => SolverKind::FastGreedy,
            SolverArg::FastLocal => SolverKind::FastLocal,
            SolverArg::Softimpute => SolverKind::SoftImpute,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScopeArg {
    Joint,
    PerRow,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Ml100k,
    Ml1m,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Greedy,
    Local,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DesignArg {
    Gaussian,
    Orthonormal,
}

#[derive(Debug, Args)]
struct Output {
    /// CSV destination [default: stdout]
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// JSON summary destination [default: stderr]
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Per-iteration solver trace as CSV
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Record wall-clock seconds instead of zeros
    #[arg(long)]
    timing: bool,
    /// Run everything on the calling thread
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct Inner {
    /// Iteration cap of each inner solve (LSQR, or quasi-Newton for Huber)
    #[arg(long)]
    inner_iters: Option<usize>,
    /// Solve each refit exactly instead of with capped iterations
    #[arg(long)]
    full_inner: bool,
    /// Organisation of the capped least-squares solve
    #[arg(long, value_enum, default_value = "joint")]
    ls_scope: ScopeArg,
    /// Outer iterations for local search (L), or the cap for fast local search
    #[arg(long)]
    outer_iters: Option<usize>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    true_rank: usize,
    /// Fraction of observed entries
    #[arg(long, default_value_t = 0.2)]
    p: f64,
    #[arg(long, default_value_t = 10.0)]
    snr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "fast-local")]
    solver: SolverArg,
    /// Largest rank on the curve (SoftImpute: rank cap)
    #[arg(long, default_value_t = 30)]
    rank: usize,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    #[command(flatten)]
    inner: Inner,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct RpcaArgs {
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    true_rank: usize,
    /// Fraction of corrupted entries
    #[arg(long, default_value_t = 0.05)]
    sparse_frac: f64,
    /// Corruption magnitude, in units of sd(L0) unless --absolute
    #[arg(long, default_value_t = 10.0)]
    sparse_mag: f64,
    /// Huber threshold, in units of sd(L0) unless --absolute
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Read --sparse-mag and --delta as absolute values
    #[arg(long)]
    absolute: bool,
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "fast-greedy")]
    solver: SolverArg,
    #[command(flatten)]
    inner: Inner,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct RecsysArgs {
    /// Ratings file
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "ml100k")]
    format: FormatArg,
    /// Training fraction of each split
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    #[arg(long, default_value_t = 5)]
    splits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    rank: usize,
    /// Prediction range LO:HI, or `none`
    #[arg(long, default_value = "1:5", value_parser = parse_clip)]
    clip: Clip,
    #[arg(long, value_enum, default_value = "fast-greedy")]
    solver: SolverArg,
    #[command(flatten)]
    inner: Inner,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct EquivalenceArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    sparsity: usize,
    #[arg(long, default_value_t = 5)]
    steps: usize,
    /// Off-diagonal weight [default: squared spectral norm of the design]
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "greedy")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "gaussian")]
    design: DesignArg,
    /// Uniform response noise level; nonzero values make OMPR swap
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Report destination [default: stdout]
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
struct Clip(Option<(f64, f64)>);

fn parse_clip(s: &str) -> std::result::Result<Clip, String> {
    if s == "none" {
        return Ok(Clip(None));
    }
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI or `none`, got `{s}`"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| format!("bad lower bound `{lo}`"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| format!("bad upper bound `{hi}`"))?;
    if !(lo < hi) {
        return Err(format!("need LO < HI, got {lo}:{hi}"));
    }
    Ok(Clip(Some((lo, hi))))
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(e) = configure_threads_from_env() {
        eprintln!("error: {e}");
        return 2;
    }
    let outcome = match cli.command {
        Command::SynthComplete(a) => synth_complete(&a),
        Command::RpcaSynth(a) => rpca_synth(&a),
        Command::Recsys(a) => recsys(&a),
        Command::Equivalence(a) => equivalence(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn sink(path: Option<&Path>, fallback: fn() -> Box<dyn Write>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => fallback(),
    })
}

fn stdout() -> Box<dyn Write> {
    Box::new(io::stdout().lock())
}

fn stderr() -> Box<dyn Write> {
    Box::new(io::stderr().lock())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(io::Error::other(format!("{other:?}"))),
    }
}

fn write_csv<R>(path: Option<&Path>, header: &[&str], rows: R) -> Result<()>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(sink(path, stdout)?);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(
    path: Option<&Path>,
    fallback: fn() -> Box<dyn Write>,
    value: &T,
) -> Result<()> {
    let mut w = sink(path, fallback)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn secs(nanos: u128, timing: bool) -> f64 {
    if timing {
        nanos as f64 * 1e-9
    } else {
        0.0
    }
}

fn write_trace(
    path: &Path,
    runs: &[(usize, usize, &[IterationTrace])],
    timing: bool,
) -> Result<()> {
    let rows = runs.iter().flat_map(|&(trial, target, traces)| {
        traces.iter().map(move |t| {
            vec![
                trial.to_string(),
                target.to_string(),
                t.iter.to_string(),
                t.rank.to_string(),
                t.objective.to_string(),
                t.top_sigma.to_string(),
                t.truncated_column.map_or(String::new(), |c| c.to_string()),
                t.power_converged.to_string(),
                t.inner_converged.to_string(),
                secs(t.wall_nanos, timing).to_string(),
            ]
        })
    });
    write_csv(Some(path), &TRACE_HEADER, rows)
}

fn solver_config(
    inner: &Inner,
    rank: usize,
    seed: u64,
    default_iters: usize,
    sequential: bool,
) -> SolverConfig {
    let mut cfg = if inner.full_inner {
        InnerConfig::full_accuracy()
    } else {
        InnerConfig::default()
            .with_ls_iters(inner.inner_iters.unwrap_or(default_iters))
            .with_scope(match inner.ls_scope {
                ScopeArg::Joint => LsqrScope::Joint,
                ScopeArg::PerRow => LsqrScope::PerRow,
            })
    };
    if let Some(k) = inner.inner_iters {
        cfg.grad_inner_iters = k;
    }
    cfg.parallel = !sequential;
    let mut config = SolverConfig::new(rank).with_seed(seed).with_inner(cfg);
    if let Some(l) = inner.outer_iters {
        config.max_outer_iters = l;
    }
    config
}

fn check_count(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(Error::InvalidConfig(format!("--{name} must be >= 1")));
    }
    Ok(())
}

#[derive(Serialize)]
struct CompletionReport {
    solver: String,
    seed: u64,
    #[serde(flatten)]
    summary: crate::experiments::CurveSummary,
}

fn synth_complete(a: &SynthArgs) -> Result<i32> {
    check_count("trials", a.trials)?;
    check_count("rank", a.rank)?;
    let kind = SolverKind::from(a.solver);
    let out = &a.output;
    let runs = map_indices(a.trials, !out.sequential, |trial| {
        let seed = a.seed.wrapping_add(trial as u64);
        let inst = gen_completion(&SynthCompletionConfig {
            m: a.m,
            n: a.n,
            true_rank: a.true_rank,
            observed_fraction: a.p,
            snr: a.snr,
            seed,
        })?;
        let mut config = solver_config(&a.inner, a.rank, seed, 3, out.sequential);
        if kind == SolverKind::Local {
            config.eps = SolverConfig::local(1, 1).eps;
        }
        completion_curve(
            &inst,
            &CurveSpec {
                solver: kind,
                max_rank: a.rank,
                config,
                local_iters: a.inner.outer_iters.unwrap_or(DEFAULT_LOCAL_ITERS),
                timing: out.timing,
            },
        )
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let rows = runs.iter().enumerate().flat_map(|(trial, run)| {
        run.points.iter().map(move |p: &CurvePoint| {
            vec![
                trial.to_string(),
                p.rank.to_string(),
                p.train_nmse.to_string(),
                p.test_nmse.to_string(),
                p.seconds.to_string(),
            ]
        })
    });
    write_csv(out.out.as_deref(), &COMPLETION_HEADER, rows)?;
    if let Some(path) = &out.trace {
        let flat: Vec<(usize, usize, &[IterationTrace])> = runs
            .iter()
            .enumerate()
            .flat_map(|(trial, run)| {
                run.traces
                    .iter()
                    .map(move |(k, t)| (trial, *k, t.as_slice()))
            })
            .collect();
        write_trace(path, &flat, out.timing)?;
    }
    let curves: Vec<Vec<CurvePoint>> = runs.into_iter().map(|r| r.points).collect();
    let report = CompletionReport {
        solver: a
            .solver
            .to_possible_value()
            .map_or_else(String::new, |v| v.get_name().to_owned()),
        seed: a.seed,
        summary: summarize(&curves)?,
    };
    write_json(out.json.as_deref(), stderr, &report)?;
    Ok(0)
}

#[derive(Serialize)]
struct RpcaReport {
    relative_error: f64,
    objective: f64,
    delta: f64,
    rank: usize,
    seed: u64,
}

fn rpca_synth(a: &RpcaArgs) -> Result<i32> {
    check_count("rank", a.rank)?;
    let kind = SolverKind::from(a.solver);
    let out = &a.output;
    let mut config = solver_config(&a.inner, a.rank, a.seed, 3, out.sequential);
    if kind == SolverKind::Local {
        config.eps = SolverConfig::local(1, 1).eps;
        config.max_outer_iters = a.inner.outer_iters.unwrap_or(DEFAULT_LOCAL_ITERS);
    }
    let outcome = rpca_recovery(
        &SynthRpcaConfig {
            m: a.m,
            n: a.n,
            true_rank: a.true_rank,
            sparse_fraction: a.sparse_frac,
            sparse_magnitude: a.sparse_mag,
            magnitude_relative: !a.absolute,
            seed: a.seed,
        },
        a.delta,
        !a.absolute,
        kind,
        &config,
    )?;
    let rows = outcome.traces.iter().map(|t| {
        vec![
            t.iter.to_string(),
            t.rank.to_string(),
            t.objective.to_string(),
            t.top_sigma.to_string(),
            secs(t.wall_nanos, out.timing).to_string(),
        ]
    });
    write_csv(out.out.as_deref(), &RPCA_HEADER, rows)?;
    if let Some(path) = &out.trace {
        write_trace(path, &[(0, a.rank, &outcome.traces)], out.timing)?;
    }
    write_json(
        out.json.as_deref(),
        stderr,
        &RpcaReport {
            relative_error: outcome.relative_error,
            objective: outcome.objective,
            delta: outcome.delta,
            rank: outcome.pair.rank(),
            seed: a.seed,
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct RatingsReport {
    splits: usize,
    rank: usize,
    train_rmse_mean: f64,
    train_rmse_stderr: f64,
    test_rmse_mean: f64,
    test_rmse_stderr: f64,
}

fn recsys(a: &RecsysArgs) -> Result<i32> {
    check_count("splits", a.splits)?;
    check_count("rank", a.rank)?;
    let kind = SolverKind::from(a.solver);
    if kind == SolverKind::SoftImpute {
        return Err(Error::InvalidConfig(
            "recsys supports the rank solvers only".into(),
        ));
    }
    let out = &a.output;
    let format = match a.format {
        FormatArg::Ml100k => RatingsFormat::Ml100k,
        FormatArg::Ml1m => RatingsFormat::Ml1m,
    };
    let ds = load_movielens(&a.data, format)?;
    let fits = map_indices(a.splits, !out.sequential, |k| {
        let seed = a.seed.wrapping_add(k as u64);
        let (train, test) = split_ratings(&ds, a.split, seed)?;
        let mut config = solver_config(&a.inner, a.rank, seed, 2, out.sequential);
        if kind == SolverKind::Local {
            config.eps = SolverConfig::local(1, 1).eps;
            config.max_outer_iters = a.inner.outer_iters.unwrap_or(DEFAULT_LOCAL_ITERS);
        }
        let start = std::time::Instant::now();
        let fit = ratings_fit(&train, &test, a.clip.0, kind, &config)?;
        Ok((fit, start.elapsed().as_nanos()))
    });
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;
    let rows = fits.iter().enumerate().map(|(k, (fit, nanos))| {
        vec![
            k.to_string(),
            fit.train_rmse.to_string(),
            fit.test_rmse.to_string(),
            secs(*nanos, out.timing).to_string(),
        ]
    });
    write_csv(out.out.as_deref(), &RATINGS_HEADER, rows)?;
    if let Some(path) = &out.trace {
        let flat: Vec<(usize, usize, &[IterationTrace])> = fits
            .iter()
            .enumerate()
            .map(|(k, (fit, _))| (k, a.rank, fit.traces.as_slice()))
            .collect();
        write_trace(path, &flat, out.timing)?;
    }
    let train: Vec<f64> = fits.iter().map(|f| f.0.train_rmse).collect();
    let test: Vec<f64> = fits.iter().map(|f| f.0.test_rmse).collect();
    let (train_rmse_mean, train_rmse_stderr) = mean_stderr(&train);
    let (test_rmse_mean, test_rmse_stderr) = mean_stderr(&test);
    write_json(
        out.json.as_deref(),
        stderr,
        &RatingsReport {
            splits: a.splits,
            rank: a.rank,
            train_rmse_mean,
            train_rmse_stderr,
            test_rmse_mean,
            test_rmse_stderr,
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct EquivalenceJson {
    mode: &'static str,
    passed: bool,
    near_tie: bool,
    beta: f64,
    matrix_steps: usize,
    vector_steps: usize,
    max_offdiag: f64,
    max_iterate_gap: f64,
    min_gap: f64,
    failure: Option<String>,
}

fn equivalence(a: &EquivalenceArgs) -> Result<i32> {
    let kind = match a.design {
        DesignArg::Gaussian => DesignKind::Gaussian,
        DesignArg::Orthonormal => DesignKind::Orthonormal,
    };
    let mut problem = planted_instance(a.n, a.sparsity, kind, a.seed)?;
    if a.noise != 0.0 {
        problem = problem.with_response_noise(a.noise, a.seed)?;
    }
    let beta = match a.beta {
        Some(b) => b,
        None => problem.default_beta()?,
    };
    let (mode, name) = match a.mode {
        ModeArg::Greedy => (EquivalenceMode::Greedy, "greedy"),
        ModeArg::Local => (EquivalenceMode::Local, "local"),
    };
    let report = check_equivalence(&problem, beta, a.steps, mode, a.seed)?;
    let passed = report.passed();
    if !passed && report.near_tie() {
        eprintln!(
            "warning: selection gap {:.2e} is a near tie; the comparison is not meaningful",
            report.min_gap
        );
    }
    write_json(
        a.json.as_deref(),
        stdout,
        &EquivalenceJson {
            mode: name,
            passed,
            near_tie: report.near_tie(),
            beta,
            matrix_steps: report.matrix_steps,
            vector_steps: report.vector_steps,
            max_offdiag: report.max_offdiag,
            max_iterate_gap: report.max_iterate_gap,
            min_gap: report.min_gap,
            failure: report.failure,
        },
    )?;
    Ok(if passed { 0 } else { 1 })
}
