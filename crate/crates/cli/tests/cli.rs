use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn blowup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blowup"))
        .args(args)
        .env_remove("BLOWUP_WORKERS")
        .output()
        .expect("spawn blowup")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn key_paths(v: &Value, prefix: &str, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let path = format!("{prefix}.{k}");
                out.insert(path.clone());
                key_paths(child, &path, out);
            }
        }
        Value::Array(items) => {
            for child in items {
                key_paths(child, &format!("{prefix}[]"), out);
            }
        }
        _ => {}
    }
}

#[test]
fn constants_report_for_the_default_parameters() {
    let out = blowup(&["constants"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["beta"].as_f64(), Some(0.75));
    assert_eq!(v["p"].as_f64(), Some(5.0));
    for key in ["kappa", "q", "B", "c0_tilde", "c2_tilde", "b", "a", "b0", "consistency_residual"] {
        assert!(v[key].is_number(), "missing {key}");
    }
    assert!(v["consistency_residual"].as_f64().unwrap() < 1e-12);
}

#[test]
fn p_at_three_is_a_configuration_error() {
    let out = blowup(&["constants", "--p", "3.0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("p > 3"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn negative_mu_is_a_configuration_error() {
    let out = blowup(&["constants", "--mu", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu"));
}

#[test]
fn missing_config_file_is_a_configuration_error() {
    let out = blowup(&["constants", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"p": 7.0, "mu": 0.5}"#).unwrap();
    let v = json(&blowup(&["constants", "--config", cfg.to_str().unwrap(), "--mu", "2"]));
    assert_eq!(v["p"].as_f64(), Some(7.0));
    assert_eq!(v["mu"].as_f64(), Some(2.0));
    assert!((v["beta"].as_f64().unwrap() - 8.0 / 12.0).abs() < 1e-15);
}

#[test]
fn verify_battery_passes_by_default() {
    let out = blowup(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["all_passed"], Value::Bool(true));
    assert_eq!(v["checks"].as_array().unwrap().len(), 8);
}

#[test]
fn weight_fault_fails_only_the_quadrature_checks() {
    let out = blowup(&["verify", "--inject-weight-fault", "1e-3"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["all_passed"], Value::Bool(false));
    let failed: BTreeSet<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == Value::Bool(false))
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains("moment_square"));
    assert!(failed.contains("moment_cube"));
    for untouched in ["eigen_residual_order", "residual_bound_trend", "constants_consistency", "vhj_round_trip"] {
        assert!(!failed.contains(untouched), "{untouched} should not depend on the weights");
    }
}

#[test]
fn verify_schema_is_stable() {
    let mut schemas = Vec::new();
    for args in [&["verify"][..], &["verify"][..], &["verify", "--inject-weight-fault", "1e-3"][..]] {
        let mut keys = BTreeSet::new();
        key_paths(&json(&blowup(args)), "", &mut keys);
        schemas.push(keys);
    }
    assert_eq!(schemas[0], schemas[1]);
    assert_eq!(schemas[0], schemas[2]);
}

#[test]
fn simulate_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["one", "two"] {
        let target = dir.path().join(name);
        let out = blowup(&[
            "simulate",
            "--s-end",
            "51",
            "--d0",
            "0.5",
            "--deterministic",
            "--output-dir",
            target.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        let meta: Value = serde_json::from_str(&read(&target, "metadata.json")).unwrap();
        assert!(meta["elapsed_seconds"].is_null());
        assert_eq!(meta["kind"], "simulate");
        reports.push([
            read(&target, "report.json"),
            read(&target, "modes.csv"),
            read(&target, "diagnostics.csv"),
            meta["config_hash"].as_str().unwrap().to_string(),
        ]);
    }
    assert_eq!(reports[0], reports[1]);
    assert!(reports[0][1].starts_with("s,v0,v1,v2,vminus_weighted,ve_sup,inside\n"));
}

#[test]
fn ode_writes_a_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = blowup(&["ode", "--s-end", "5000", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "trajectory.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,w0bar,w2bar"));
    let w2: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(w2.len() > 100);
    assert!(w2.iter().all(|&w| w < 0.0));
    assert!(w2.windows(2).all(|p| p[1] >= p[0]));
    let report: Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    assert!(report["fit"]["exponent_w2"].is_number());
}

#[test]
fn ode_span_below_one_and_a_half_decades_is_rejected() {
    let out = blowup(&["ode", "--s-end", "2000"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1.5 decades"));
}

#[test]
fn physical_run_recovers_the_blow_up_time() {
    let out = blowup(&["physical", "--deterministic"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["t_error"].as_f64().unwrap().abs() < 0.05);
    assert_eq!(v["inconclusive"], Value::Bool(false));
}

#[test]
fn shoot_with_a_coarse_boundary_finds_degree_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = blowup(&["shoot", "--samples", "8", "--levels", "1", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report["degree"]["winding"].as_i64(), Some(1));
    assert_eq!(report["search"]["violations"].as_u64(), Some(0));
    let probes = read(dir.path(), "probes.csv");
    assert!(probes.starts_with("d0,d1,s_star,exit_component,exit_sign\n"));
    assert!(probes.lines().count() > 8);
}

#[test]
fn bad_rectangle_is_a_configuration_error() {
    let out = blowup(&["shoot", "--rect", "1,-1,-2,2"]);
    assert_eq!(out.status.code(), Some(2));
}

fn sweep(dir: &Path, name: &str, extra: &[&str]) -> String {
    let target = dir.join(name);
    let mut args = vec!["sweep", "--deterministic", "--output-dir", target.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = blowup(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    read(&target, "sweep.csv")
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn one_point_sweep_matches_a_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let csv = sweep(dir.path(), "sweep", &["--grid-p", "5", "--grid-mu", "1"]);
    assert_eq!(csv.lines().count(), 2);
    let text = String::from_utf8(blowup(&["constants"]).stdout).unwrap();
    for (col, key) in [("b", "\"b\""), ("big_b", "\"B\""), ("beta", "\"beta\""), ("a_profile", "\"a\"")] {
        let cell = &column(&csv, col)[0];
        let line = text.lines().find(|l| l.trim_start().starts_with(key)).unwrap();
        assert!(line.contains(&format!(": {cell},")), "{col}: {cell} vs {line}");
    }
}

#[test]
fn permuted_grid_gives_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let sorted = sweep(dir.path(), "a", &["--grid-p", "4,5,7", "--grid-mu", "0.5,1,2"]);
    let shuffled = sweep(dir.path(), "b", &["--grid-p", "7,4,5", "--grid-mu", "2,0.5,1"]);
    assert_eq!(sorted, shuffled);
}

#[test]
fn b_decreases_along_mu_in_a_three_by_three_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = sweep(dir.path(), "grid", &["--grid-p", "4,5,7", "--grid-mu", "0.5,1,2"]);
    let ps: Vec<f64> = column(&csv, "p").iter().map(|v| v.parse().unwrap()).collect();
    let mus: Vec<f64> = column(&csv, "mu").iter().map(|v| v.parse().unwrap()).collect();
    let bs: Vec<f64> = column(&csv, "b").iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(bs.len(), 9);
    for row in 0..3 {
        let r = row * 3;
        assert!(ps[r..r + 3].iter().all(|&p| p == ps[r]));
        assert!(mus[r] < mus[r + 1] && mus[r + 1] < mus[r + 2]);
        assert!(bs[r] > bs[r + 1] && bs[r + 1] > bs[r + 2], "p = {}: {:?}", ps[r], &bs[r..r + 3]);
    }
}

#[test]
fn failing_grid_points_do_not_abort_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let csv = sweep(dir.path(), "partial", &["--grid-p", "3,5"]);
    let errors = column(&csv, "error");
    assert_eq!(errors.len(), 2);
    assert!(errors[0].contains("p > 3"));
    assert!(errors[1].is_empty());
    let summary: Value = serde_json::from_str(&read(&dir.path().join("partial"), "report.json")).unwrap();
    assert_eq!(summary["failed"].as_u64(), Some(1));
}
