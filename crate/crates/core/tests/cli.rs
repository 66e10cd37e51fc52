use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_meta-smooth"));
    c.env_remove("META_SMOOTH_JOBS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let y = path(dir.path(), "y.csv");
    let out = run(&["simulate", "--model", "1", "--T", "200", "--seed", "42", "--out", &y]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&y).unwrap();
    assert!(csv.starts_with("y1,y2\n"));
    assert_eq!(csv.lines().count(), 201);

    let out = run(&["estimate", "--in", &y, "--difference", "--estimator", "meta"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["reduced"]["theta"].as_array().unwrap().len(), 2);
    assert_eq!(report["reduced"]["sigma_u"][1].as_array().unwrap().len(), 2);
    assert_eq!(report["per_weight"].as_array().unwrap().len(), 3);
    assert!(report["diagnostics"]["theta_spectral_radius"].as_f64().unwrap() < 1.0);
}

#[test]
fn simulate_from_params_file_and_forecast() {
    let dir = tempfile::tempdir().unwrap();
    let params = path(dir.path(), "p.json");
    fs::write(&params, r#"{"n": 1, "sigma_eta": [1.0], "sigma_eps": [1.0]}"#).unwrap();
    let y = path(dir.path(), "y.csv");
    assert!(run(&["simulate", "--params", &params, "--T", "100", "--seed", "1", "--out", &y])
        .status
        .success());

    let reduced = path(dir.path(), "r.json");
    fs::write(&reduced, r#"{"n": 1, "theta": [0.0], "sigma_u": [1.0]}"#).unwrap();
    let out = run(&["forecast", "--in", &y, "--params", &reduced]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let f: Value = serde_json::from_slice(&out.stdout).unwrap();
    // Θ = 0 forecasts the last observation
    let last: f64 = fs::read_to_string(&y).unwrap().lines().last().unwrap().parse().unwrap();
    assert_eq!(f["forecast"][0].as_f64().unwrap(), last);

    let out = run(&["forecast", "--in", &y, "--estimator", "meta"]);
    assert!(out.status.success());
    let f: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(f["source"], "meta");
}

#[test]
fn ml_can_start_from_meta() {
    let dir = tempfile::tempdir().unwrap();
    let y = path(dir.path(), "y.csv");
    assert!(run(&["simulate", "--model", "1", "--T", "300", "--seed", "5", "--out", &y]).status.success());
    let out = run(&["estimate", "--in", &y, "--difference", "--estimator", "ml", "--init", "meta"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["init_source"], "meta");
    assert!(report["final_nll"].as_f64().unwrap() <= report["initial_nll"].as_f64().unwrap());
}

#[test]
fn benchmark_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    let args = |out: &str| {
        vec![
            "benchmark".to_owned(),
            "--models".into(),
            "1,2".into(),
            "--T".into(),
            "200,1000".into(),
            "--reps".into(),
            "100".into(),
            "--estimators".into(),
            "meta,mom".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            out.into(),
        ]
    };
    let first = bin().args(args(&a)).output().unwrap();
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = bin().args(args(&b)).env("META_SMOOTH_JOBS", "2").output().unwrap();
    assert!(second.status.success());
    let (ca, cb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("model,T,estimator,target,mean_rmse,std_error,failures,fallbacks\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2 * 2);
    let table = String::from_utf8(first.stdout).unwrap();
    assert!(table.contains("Theta x1000"));
}

#[test]
fn benchmark_from_config_file_with_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "cfg.json");
    let out = path(dir.path(), "out.csv");
    let timing = path(dir.path(), "t.csv");
    fs::write(
        &cfg,
        format!(r#"{{"models": [3], "sample_sizes": [200], "replications": 5, "estimators": ["meta"], "master_seed": 1, "output": "{out}"}}"#),
    )
    .unwrap();
    let res = run(&["benchmark", "--config", &cfg, "--timing", &timing]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 3);
    assert!(fs::read_to_string(&timing).unwrap().starts_with("model,T,estimator,mean_elapsed_seconds\n"));
}

#[test]
fn forecast_experiment_writes_tidy_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "f.csv");
    let res = run(&["forecast-experiment", "--model", "2", "--T", "100", "--reps", "10", "--estimators", "true,meta", "--out", &out]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("replication,estimator,component,error,reason\n"));
    assert_eq!(text.lines().count(), 1 + 10 * 2 * 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--T", "10"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--model", "9", "--T", "10"]).status.code(), Some(1));
    assert_eq!(run(&["benchmark", "--T", "10"]).status.code(), Some(1));
    assert_eq!(run(&["--jobs", "0", "simulate", "--model", "1", "--T", "10"]).status.code(), Some(1));
    assert_eq!(
        run(&["estimate", "--in", &path(dir.path(), "missing.csv")]).status.code(),
        Some(1)
    );

    let bad = path(dir.path(), "bad.csv");
    fs::write(&bad, "y1,y2\n1,2\n3,oops\n").unwrap();
    let out = run(&["estimate", "--in", &bad, "--difference"]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 3"), "{msg}");

    // a constant series is valid input that no estimator can fit
    let flat = path(dir.path(), "flat.csv");
    let mut body = String::from("y1,y2\n");
    for _ in 0..50 {
        body.push_str("1,2\n");
    }
    fs::write(&flat, body).unwrap();
    let out = run(&["estimate", "--in", &flat, "--difference"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(run(&["estimate", "--in", &flat, "--difference", "--fallback"]).status.code(), Some(2));
    assert_eq!(run(&["estimate", "--in", &flat, "--difference", "--estimator", "mom"]).status.code(), Some(2));
}
