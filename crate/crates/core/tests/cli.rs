//! End-to-end tests of the command-line harness: exit codes, output files,
//! determinism, and the documented reference scenarios.

use std::path::Path;
use std::process::Command;

use hsmilne::cli_harness::{run, EXIT_CHECK_FAILED, EXIT_PASS, EXIT_USAGE};

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// Runs the harness in-process; returns the exit code and the stdout JSON.
fn run_in_process(args: &[&str]) -> (i32, Option<serde_json::Value>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["hsmilne"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, serde_json::from_slice(&out).ok())
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn malformed_config_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{ not json");
    assert_eq!(run_in_process(&["operator-check", "--config", &cfg]).0, EXIT_USAGE);
    let cfg = write_config(dir.path(), r#"{"operator": {"q0": 1.0, "mass": 2.0}}"#);
    assert_eq!(run_in_process(&["operator-check", "--config", &cfg]).0, EXIT_USAGE);
    assert_eq!(run_in_process(&["no-such-command"]).0, EXIT_USAGE);
    assert_eq!(run_in_process(&["trace", "--format", "xml"]).0, EXIT_USAGE);
}

#[test]
fn underresolved_grid_fails_moment_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"operator": {"v_max": 1.0}}"#);
    let (code, report) = run_in_process(&["operator-check", "--config", &cfg]);
    assert_eq!(code, EXIT_CHECK_FAILED);
    let report = report.unwrap();
    assert_eq!(report["checks"][0]["name"], "gaussian_moments");
    assert_eq!(report["checks"][0]["pass"], false);
}

#[test]
fn operator_check_on_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    // The null-residual threshold is loosened explicitly: an 8³ grid resolves
    // e₁…e₄ only to about 0.84 at q₀ = 1 (the calibrated diagonal makes e₀ exact).
    let cfg = write_config(dir.path(), r#"{"operator": {"per_axis_count": 8}, "operator_check": {"null_residual_tol": 1.0, "gamma_pairs": 2}}"#);
    let (code, report) = run_in_process(&["operator-check", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    let report = report.unwrap();
    assert_eq!(code, EXIT_PASS, "{report:#}");
    let (header, rows) = read_csv(&dir.path().join("null_residuals.csv"));
    assert_eq!(header, ["k", "relative_residual"]);
    assert_eq!(rows.len(), 5);
    assert!(rows[0][1] < 1e-12);
    assert!(dir.path().join("operator_check_summary.json").exists());
}

#[test]
fn trace_without_tangential_velocity_is_a_straight_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"trace": {"eta": 0.5, "v": [0.8, 0.0, 0.0], "ds": 0.01, "n_steps": 200}}"#);
    let (code, _) = run_in_process(&["trace", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_PASS);
    let (header, rows) = read_csv(&dir.path().join("trace.csv"));
    assert_eq!(&header[..5], ["s", "eta", "v_eta", "v_phi", "v_psi"]);
    assert_eq!(rows.len(), 201);
    for r in &rows {
        assert!((r[1] - (0.5 + 0.8 * r[0])).abs() < 1e-12);
        assert_eq!((r[2], r[3], r[4]), (0.8, 0.0, 0.0));
    }
}

#[test]
fn cycles_are_monotone_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"cycles": {"n_samples": 5000}}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, _) = run_in_process(&["cycles", "--config", &cfg, "--seed", "17", "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_PASS);
    }
    for f in ["cycles.csv", "cycles_summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let (_, rows) = read_csv(&a.join("cycles.csv"));
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), [2.0, 4.0, 8.0]);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
    assert!(rows[0][1] > rows[2][1]);
}

#[test]
fn expand_trivial_fluid_has_zero_residual() {
    let (code, report) = run_in_process(&["expand"]);
    let report = report.unwrap();
    assert_eq!(code, EXIT_PASS, "{report:#}");
    assert!(report["metrics"]["identity_residual"]["total"].as_f64().unwrap() < 1e-9);
    assert_eq!(report["metrics"]["boussinesq_residual"].as_f64().unwrap(), 0.0);
}

#[test]
fn milne_with_basis_zero_data_has_unit_density_limit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"operator": {"q0": 0.2}, "geometry": {"epsilon": 0.04}, "milne": {"boundary": {"kind": "basis_k", "k": 0}}}"#);
    let (code, report) = run_in_process(&["milne", "--config", &cfg, "--format", "json", "--out", dir.path().to_str().unwrap()]);
    let report = report.unwrap();
    assert_eq!(code, EXIT_PASS, "{report:#}");
    let gl: Vec<f64> = report["metrics"]["g_l"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let want = [1.0, 0.0, 0.0, 0.0, 0.0];
    for (g, w) in gl.iter().zip(want) {
        assert!((g - w).abs() < 1e-5, "{gl:?}");
    }
    let full: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("milne.json")).unwrap()).unwrap();
    assert_eq!(full["tables"][0]["name"], "milne_profile");
    assert_eq!(full["tables"][0]["columns"][0], "eta");
    assert!(full.get("timings").is_none());
}

#[test]
fn milne_on_truncated_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"operator": {"v_max": 1.0}, "milne": {"per_axis_count": 12}}"#);
    assert_eq!(run_in_process(&["milne", "--config", &cfg]).0, EXIT_USAGE);
}

#[test]
fn binary_reports_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_hsmilne");
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"trace": {"n_steps": 10}}"#);
    let ok = Command::new(exe).args(["trace", "--config", &cfg]).env("HSMILNE_THREADS", "1").output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_PASS));
    let summary: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(summary["command"], "trace");
    let bad = Command::new(exe).args(["trace"]).env("HSMILNE_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
}
