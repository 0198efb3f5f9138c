//! Runs the binary on the example configurations.

use std::path::PathBuf;
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finsler-lab")).args(args).output().unwrap()
}

fn run_example(name: &str) -> (i32, serde_json::Value) {
    let path = configs().join("examples").join(name);
    let out = lab(&["run", path.to_str().unwrap()]);
    let code = out.status.code().unwrap();
    let json = serde_json::from_slice(&out.stdout).unwrap_or(serde_json::Value::Null);
    (code, json)
}

#[test]
fn euclidean_identity_battery_exits_zero() {
    let (code, r) = run_example("euclidean_identity.toml");
    assert_eq!(code, 0);
    let checks = r["metrics"][0]["identity_battery"]["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        assert!(c["residual"].as_f64().unwrap() < 1e-9, "{c}");
    }
}

#[test]
fn constant_randers_is_c_reducible_not_riemannian() {
    let (code, r) = run_example("randers_classify.toml");
    assert_eq!(code, 0);
    let preds = r["metrics"][0]["classification"]["predicates"].as_array().unwrap();
    let verdict = |name: &str| preds.iter().find(|p| p["name"] == name).unwrap()["verdict"].clone();
    assert_eq!(verdict("riemannian"), "fail");
    assert_eq!(verdict("c_reducible"), "pass");
    assert_eq!(r["metrics"][0]["tensors"]["connection"]["pass"], true);
}

#[test]
fn flat_position_field_satisfies_landsberg_statement() {
    let (code, r) = run_example("euclidean_theorems.toml");
    assert_eq!(code, 0);
    let inst = r["theorems"]["instances"]
        .as_array()
        .unwrap()
        .iter()
        .find(|i| i["statement"] == "Landsberg with a concircular field is Riemannian")
        .unwrap()
        .clone();
    assert_eq!(inst["outcome"], "satisfied");
    assert_eq!(inst["trivial"], false);
}

#[test]
fn malformed_expression_exits_two_with_location() {
    let out = lab(&["run", configs().join("examples/malformed.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("malformed.toml") && err.contains("metric[0] `broken`") && err.contains("column"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn toml_syntax_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "points = 10\n[[metric]\nname = \"x\"\n").unwrap();
    let out = lab(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.toml") && err.contains("line 2"), "{err}");
}

#[test]
fn missing_file_exits_two() {
    assert_eq!(lab(&["run", "/nonexistent/config.toml"]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_one_and_out_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "tasks = [\"concircular\"]\n[[metric]]\nname = \"e\"\nfamily = \"euclidean\"\nn = 3\n\
         [[candidate]]\nname = \"c\"\nmetric = \"e\"\ncomponents = [\"1\", \"0\", \"0\"]\nexpect = \"concircular\"\n",
    )
    .unwrap();
    let report = dir.path().join("r.json");
    let out = lab(&["run", cfg.to_str().unwrap(), "--points", "7", "--seed", "3", "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["provenance"]["points"], 7);
    assert_eq!(r["provenance"]["seed"], 3);
    assert_eq!(r["candidates"][0]["fit"]["verdict"], "not_concircular");
    assert_eq!(r["summary"]["pass"], false);
}

#[test]
fn tolerance_overrides_reach_the_report() {
    let path = configs().join("examples/euclidean_identity.toml");
    let out = lab(&["run", path.to_str().unwrap(), "--tol-abs", "1e-10", "--tol-rel", "1e-9", "--points", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["provenance"]["tolerance"]["abs"], 1e-10);
    assert_eq!(r["provenance"]["tolerance"]["rel"], 1e-9);
}

#[test]
fn families_lists_every_family() {
    let out = lab(&["families"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for f in ["euclidean", "riemannian", "randers", "expression"] {
        assert!(text.contains(f));
    }
}
