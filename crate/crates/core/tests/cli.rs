use std::path::Path;
use std::process::{Command, Output};

fn lowrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowrank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn lowrank_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowrank"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn equivalence_example_exits_zero() {
    let out = lowrank(&[
        "equivalence",
        "--n",
        "10",
        "--sparsity",
        "2",
        "--steps",
        "5",
        "--seed",
        "1",
        "--mode",
        "greedy",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["failure"], serde_json::Value::Null);
}

#[test]
fn synth_complete_shape_contract() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, js) = (
        dir.path().join("curve.csv"),
        dir.path().join("summary.json"),
    );
    let out = lowrank(&[
        "synth-complete",
        "--m",
        "100",
        "--n",
        "100",
        "--true-rank",
        "5",
        "--p",
        "0.2",
        "--snr",
        "10",
        "--solver",
        "fast-local",
        "--rank",
        "30",
        "--inner-iters",
        "3",
        "--trials",
        "5",
        "--out",
        csv.to_str().unwrap(),
        "--json",
        js.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = std::fs::read_to_string(&csv).unwrap();
    let mut lines = body.lines();
    assert_eq!(
        lines.next(),
        Some("trial,rank,train_nmse,test_nmse,seconds")
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 5 * 30);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[0], (k / 30).to_string());
        assert_eq!(row[1], (k % 30 + 1).to_string());
    }
    let summary = json(&js);
    assert!(summary["best_test_nmse"].as_f64().unwrap() > 0.0);
    assert!(summary["best_rank"].as_f64().is_some());
    assert_eq!(summary["trials"], 5);
    assert_eq!(summary["curve"].as_array().unwrap().len(), 30);
}

#[test]
fn recsys_requires_data() {
    let out = lowrank(&["recsys"]);
    assert!(!out.status.success());
    let err = text(&out.stderr);
    assert!(err.contains("--data"), "{err}");
    assert!(err.contains("Usage"), "{err}");
}

#[test]
fn bad_flags_are_rejected() {
    for args in [
        vec!["synth-complete", "--bogus"],
        vec!["synth-complete", "--solver", "sgd"],
        vec!["synth-complete", "--p", "abc"],
        vec!["recsys", "--data", "x", "--clip", "5:1"],
        vec![],
    ] {
        let out = lowrank(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn invalid_values_and_io_failures_exit_nonzero() {
    let missing = lowrank(&["recsys", "--data", "/nonexistent/u.data"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(text(&missing.stderr).starts_with("error:"));
    let bad_config = lowrank(&["synth-complete", "--p", "1.5", "--trials", "1"]);
    assert_eq!(bad_config.status.code(), Some(1));
    let unwritable = lowrank(&[
        "rpca-synth",
        "--m",
        "10",
        "--n",
        "10",
        "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(unwritable.status.code(), Some(1));
    let threads = lowrank_env(&["equivalence"], "LOWRANK_THREADS", "zero");
    assert!(!threads.status.success());
}

#[test]
fn recsys_on_small_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ratings.dat");
    let mut lines = String::new();
    for user in 1..=25u32 {
        for item in 1..=20u32 {
            if (user * 7 + item * 3) % 4 != 0 {
                let rating = 1 + (user + 2 * item) % 5;
                lines += &format!("{user}::{item}::{rating}::978300760\n");
            }
        }
    }
    std::fs::write(&data, lines).unwrap();
    let js = dir.path().join("r.json");
    let out = lowrank(&[
        "recsys",
        "--data",
        data.to_str().unwrap(),
        "--format",
        "ml1m",
        "--rank",
        "4",
        "--splits",
        "3",
        "--json",
        js.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = text(&out.stdout);
    assert!(body.starts_with("split,train_rmse,test_rmse,seconds\n"));
    assert_eq!(body.lines().count(), 4);
    let report = json(&js);
    let mean = report["test_rmse_mean"].as_f64().unwrap();
    assert!(mean > 0.0 && mean <= 4.0);
}

#[test]
fn rpca_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, js) = (dir.path().join("t.csv"), dir.path().join("r.json"));
    let out = lowrank(&[
        "rpca-synth",
        "--m",
        "30",
        "--n",
        "25",
        "--rank",
        "2",
        "--true-rank",
        "2",
        "--trace",
        trace.to_str().unwrap(),
        "--json",
        js.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let body = text(&out.stdout);
    assert!(body.starts_with("iter,rank,objective,top_sigma,seconds\n"));
    assert_eq!(body.lines().count(), 3);
    let trace = std::fs::read_to_string(trace).unwrap();
    assert!(trace.starts_with(
        "trial,target_rank,iter,rank,objective,top_sigma,truncated_column,power_converged,inner_converged,seconds\n"
    ));
    assert!(json(&js)["relative_error"].as_f64().unwrap().is_finite());
}

#[test]
fn thread_cap_does_not_change_output() {
    let args = [
        "synth-complete",
        "--m",
        "30",
        "--n",
        "30",
        "--rank",
        "5",
        "--trials",
        "2",
        "--solver",
        "fast-greedy",
        "--json",
        "/dev/null",
    ];
    let one = lowrank_env(&args, "LOWRANK_THREADS", "1");
    let four = lowrank_env(&args, "LOWRANK_THREADS", "4");
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn timing_is_opt_in() {
    let args = [
        "synth-complete",
        "--m",
        "20",
        "--n",
        "20",
        "--rank",
        "3",
        "--trials",
        "1",
        "--json",
        "/dev/null",
    ];
    let plain = text(&lowrank(&args).stdout);
    assert!(plain.lines().skip(1).all(|l| l.ends_with(",0")));
    let mut timed_args = args.to_vec();
    timed_args.push("--timing");
    let timed = text(&lowrank(&timed_args).stdout);
    assert!(timed.lines().skip(1).any(|l| !l.ends_with(",0")));
}
