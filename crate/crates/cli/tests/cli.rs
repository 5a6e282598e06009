//! End-to-end checks of the `transq` binary: exit-code contract, output
//! formats, seeding, and the model-file round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_transq"))
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

#[test]
fn validate_accepts_shipped_models() {
    for name in [
        "bernoulli_geometric.json",
        "two_state_batch.json",
        "two_state_binomial.json",
    ] {
        let path = models_dir().join(name);
        let out = run(&["validate", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
    }
}

#[test]
fn validate_reports_row_sum_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(
        &path,
        r#"{"states":1,"batches":[[[0.6]],[[0.6]]],"initial":[1.0],
            "service":{"type":"geometric","alpha":0.5}}"#,
    )
    .unwrap();
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("row"), "report: {text}");
    assert!(text.contains("1.2"), "report: {text}");
}

#[test]
fn malformed_input_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\"states\": 1, ").unwrap();
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let missing = dir.path().join("nope.json");
    let out = run(&["solve", missing.to_str().unwrap(), "--time", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn invalid_model_exits_two_from_engines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(
        &path,
        r#"{"states":1,"batches":[[[0.6]],[[0.6]]],"initial":[1.0],
            "service":{"type":"geometric","alpha":0.5}}"#,
    )
    .unwrap();
    for args in [
        vec!["solve", path.to_str().unwrap(), "--time", "2"],
        vec![
            "simulate",
            path.to_str().unwrap(),
            "--time",
            "2",
            "--runs",
            "10",
        ],
        vec!["stationary", path.to_str().unwrap()],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn solve_reference_distribution() {
    let path = models_dir().join("bernoulli_geometric.json");
    let out = run(&["solve", path.to_str().unwrap(), "--time", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    let dist: Vec<f64> = doc["distribution"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(dist.len(), 3);
    assert!((dist[0] - 0.65625).abs() < 1e-15);
    assert!((dist[1] - 0.3125).abs() < 1e-15);
    assert!((dist[2] - 0.03125).abs() < 1e-15);
    assert!((doc["mean"].as_f64().unwrap() - 0.375).abs() < 1e-13);
}

#[test]
fn solve_horizon_zero_is_point_mass() {
    let path = models_dir().join("two_state_batch.json");
    let out = run(&[
        "solve",
        path.to_str().unwrap(),
        "--time",
        "0",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,probability"));
    assert_eq!(lines.next(), Some("0,1.0000000000000000e0"));
    assert_eq!(lines.next(), None);
}

#[test]
fn truncation_gate_trips_and_can_be_overridden() {
    let path = models_dir().join("bernoulli_geometric.json");
    let gated = run(&[
        "solve",
        path.to_str().unwrap(),
        "--time",
        "6",
        "--max-degree",
        "1",
    ]);
    assert_eq!(gated.status.code(), Some(4));
    assert!(gated.stdout.is_empty());
    let allowed = run(&[
        "solve",
        path.to_str().unwrap(),
        "--time",
        "6",
        "--max-degree",
        "1",
        "--allow-truncation",
    ]);
    assert_eq!(allowed.status.code(), Some(0));
    let doc = stdout_json(&allowed);
    assert!(doc["truncation_loss"].as_f64().unwrap() > 1e-6);
}

#[test]
fn simulate_is_bytewise_reproducible() {
    let path = models_dir().join("two_state_batch.json");
    let args = [
        "simulate",
        path.to_str().unwrap(),
        "--time",
        "6",
        "--runs",
        "3000",
        "--seed",
        "19",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn simulate_seed_defaults_to_environment() {
    let path = models_dir().join("bernoulli_geometric.json");
    let out = binary()
        .args([
            "simulate",
            path.to_str().unwrap(),
            "--time",
            "3",
            "--runs",
            "50",
        ])
        .env("TRANSQ_SEED", "777")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["seed"].as_u64(), Some(777));
}

#[test]
fn simulate_effective_checks_are_clean() {
    let path = models_dir().join("two_state_batch.json");
    let out = run(&[
        "simulate",
        path.to_str().unwrap(),
        "--time",
        "8",
        "--runs",
        "500",
        "--seed",
        "3",
        "--effective-checks",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    let checks = &doc["effective_checks"];
    assert_eq!(checks["clean"].as_bool(), Some(true));
    assert_eq!(checks["terminal_identity_failures"].as_u64(), Some(0));
}

#[test]
fn simulate_csv_has_standard_errors() {
    let path = models_dir().join("bernoulli_geometric.json");
    let out = run(&[
        "simulate",
        path.to_str().unwrap(),
        "--time",
        "2",
        "--runs",
        "100",
        "--seed",
        "5",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("m,probability,standard_error\n"));
    assert!(text.lines().count() >= 2);
}

#[test]
fn compare_passes_on_consistent_model() {
    let path = models_dir().join("two_state_batch.json");
    let out = run(&[
        "compare",
        path.to_str().unwrap(),
        "--time",
        "5",
        "--runs",
        "4000",
        "--seed",
        "11",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("verdict: PASS"));
}

#[test]
fn mminf_reference_values_and_rejections() {
    let out = run(&["mminf", "--p", "0.5", "--alpha", "0.5", "--time", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert!((doc["mean"].as_f64().unwrap() - 0.375).abs() < 1e-15);
    assert!((doc["variance"].as_f64().unwrap() - 0.296875).abs() < 1e-15);
    assert!((doc["fano"].as_f64().unwrap() - 0.7916666666666666).abs() < 1e-12);
    assert_eq!(
        run(&["mminf", "--p", "1.5", "--alpha", "0.5", "--time", "2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["mminf", "--p", "0.5", "--alpha", "1.0", "--time", "2"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn stationary_immediate_departures_and_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let fast = dir.path().join("fast.json");
    std::fs::write(
        &fast,
        r#"{"states":1,"batches":[[[0.5]],[[0.5]]],"initial":[1.0],
            "service":{"type":"deterministic","d":1}}"#,
    )
    .unwrap();
    let out = run(&["stationary", fast.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["t_converged"].as_u64(), Some(1));
    assert!((doc["distribution"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);

    // slowly decaying service tail with a tiny horizon budget
    let weights: Vec<f64> = (1..=400).map(|k| 1.0 / (k as f64 * k as f64)).collect();
    let total: f64 = weights.iter().sum();
    let q: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let heavy = dir.path().join("heavy.json");
    let doc = serde_json::json!({
        "states": 1,
        "batches": [[[0.5]], [[0.5]]],
        "initial": [1.0],
        "service": {"type": "pmf", "q": q},
    });
    std::fs::write(&heavy, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = run(&["stationary", heavy.to_str().unwrap(), "--max-time", "3"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no stationary convergence"));
}

#[test]
fn dump_model_round_trips_bytewise() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    let source = models_dir().join("two_state_binomial.json");
    let out = run(&[
        "validate",
        source.to_str().unwrap(),
        "--dump-model",
        first.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&[
        "validate",
        first.to_str().unwrap(),
        "--dump-model",
        second.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let a = std::fs::read(&first).unwrap();
    let b = std::fs::read(&second).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "canonical dump must be a fixed point");
}

#[test]
fn solve_out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("result.json");
    let path = models_dir().join("bernoulli_geometric.json");
    let out = run(&[
        "solve",
        path.to_str().unwrap(),
        "--time",
        "2",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(doc["time"].as_u64(), Some(2));
}
