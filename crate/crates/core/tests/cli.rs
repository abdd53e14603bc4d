// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fedlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedlab")).args(args).output().expect("binary runs")
}

fn write_json(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn scalar_problem_file(path: &Path) {
    write_json(
        path,
        &json!({"d": 1, "m": 2, "clients": [
            {"kind": "quadratic", "A": [2.0], "b": [2.0]},
            {"kind": "quadratic", "A": [1.0], "b": [-1.0]}
        ]}),
    );
}

fn last_row(csv: &str) -> Vec<String> {
    csv.lines().last().unwrap().split(',').map(str::to_string).collect()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("diagnostic line");
    serde_json::from_str(line).expect("diagnostic is json")
}

#[test]
fn generate_then_solve_fedsplit() {
    let dir = tempfile::tempdir().unwrap();
    let gen_cfg = dir.path().join("gen.json");
    write_json(&gen_cfg, &json!({"ensemble": {"isotropic_lsq": {"m": 2, "d": 1, "n": 3, "sigma2": 0.25}}, "seed": 4}));
    let out = fedlab(&["generate", "--config", gen_cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("problem.json").exists());

    let solve_cfg = dir.path().join("solve.json");
    write_json(
        &solve_cfg,
        &json!({"problem": "problem.json", "algorithm": {"method": "fedsplit", "rounds": 200}, "output_dir": "runs"}),
    );
    let out = fedlab(&["solve", "--config", solve_cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["command"], "solve");
    let csv = fs::read_to_string(dir.path().join("runs/fedsplit_exact.csv")).unwrap();
    assert!(csv.starts_with("t,cost,gap,grad_norm,dist_to_ref,prox_residual\n"));
    assert_eq!(csv.lines().count(), 202);
    let grad_norm: f64 = last_row(&csv)[3].parse().unwrap();
    assert!(grad_norm <= 1e-8, "{grad_norm}");
    assert!(dir.path().join("runs/fedsplit_exact.json").exists());
}

#[test]
fn verify_reports_fedgd_stationarity() {
    let dir = tempfile::tempdir().unwrap();
    scalar_problem_file(&dir.path().join("problem.json"));
    let cfg = dir.path().join("verify.json");
    write_json(&cfg, &json!({"problem": "problem.json", "s": 0.1, "e": 2}));
    let out_dir = dir.path().join("out");
    let out = fedlab(&["verify", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("verify.json")).unwrap()).unwrap();
    for key in ["instance", "residuals", "oracle_points", "distances"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    let stationarity = report["residuals"]["fedgd_limit"]["stationarity"].as_f64().unwrap();
    assert!(stationarity > 1e-3);
    let gd = report["oracle_points"]["fedgd_limit"][0].as_f64().unwrap();
    assert!((gd - 4.5 / 8.3).abs() < 1e-15);
}

#[test]
fn missing_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");
    let out = fedlab(&["solve", "--config", dir.path().join("nope.json").to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");
    assert!(!out_dir.exists());
}

#[test]
fn unknown_keys_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    scalar_problem_file(&dir.path().join("problem.json"));
    let cfg = dir.path().join("solve.json");
    write_json(&cfg, &json!({"problem": "problem.json", "algorithm": {"method": "fedprox", "rounds": 5}, "colour": 1}));
    let out = fedlab(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    write_json(&cfg, &json!({"problem": "problem.json", "algorithm": {"method": "fedprox", "rounds": 5}}));
    let out = fedlab(&["solve", "--config", cfg.to_str().unwrap(), "--set", "algorithm.bogus=3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn numerical_failure_exits_1_with_round() {
    let dir = tempfile::tempdir().unwrap();
    scalar_problem_file(&dir.path().join("problem.json"));
    let cfg = dir.path().join("solve.json");
    write_json(&cfg, &json!({"problem": "problem.json", "algorithm": {"method": "fedgd", "e": 1, "s": 2.0, "rounds": 100}}));
    let out = fedlab(&["solve", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let diag = stderr_json(&out);
    assert_eq!(diag["error"], "diverged");
    assert!(diag["round"].as_u64().is_some());
    assert!(diag["residual"].as_str().is_some());
}

#[test]
fn overrides_and_idempotence() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("problem.json");
    scalar_problem_file(&problem);
    let before = fs::read(&problem).unwrap();
    let cfg = dir.path().join("solve.json");
    write_json(&cfg, &json!({"problem": "problem.json", "algorithm": {"method": "fedgd", "e": 2, "rounds": 50}}));
    let out_dir = dir.path().join("o");
    let args = ["solve", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--set", "algorithm.s=0.1"];
    let first = fedlab(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let csv1 = fs::read(out_dir.join("fedgd_e2.csv")).unwrap();
    let json1 = fs::read(out_dir.join("fedgd_e2.json")).unwrap();
    let second = fedlab(&args);
    assert!(second.status.success());
    assert_eq!(csv1, fs::read(out_dir.join("fedgd_e2.csv")).unwrap());
    assert_eq!(json1, fs::read(out_dir.join("fedgd_e2.json")).unwrap());
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(before, fs::read(&problem).unwrap());
    let side: Value = serde_json::from_slice(&json1).unwrap();
    assert_eq!(side["stepsize"].as_f64(), Some(0.1));
    let x: f64 = side["final_x"][0].as_f64().unwrap();
    assert!((x - 4.5 / 8.3).abs() < 1e-6);
}

#[test]
fn seed_flag_changes_generated_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gen.json");
    write_json(&cfg, &json!({"ensemble": {"logistic_gauss": {"m": 2, "d": 2, "n": 4}}}));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, seed) in [(&a, "1"), (&b, "2"), (&c, "1")] {
        let o = fedlab(&["generate", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap(), "--threads", "2"]);
        assert!(o.status.success());
    }
    let read = |p: &Path| fs::read(p.join("problem.json")).unwrap();
    assert_ne!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));
}
