//! The shipped configuration against its golden report.

use std::path::PathBuf;

use finsler_lab::{run_file, Overrides};
use serde_json::Value;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Exact on everything but numbers, which may move in the last bits across platforms.
fn compare(path: &str, a: &Value, b: &Value, diffs: &mut Vec<String>) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if (x - y).abs() > 1e-8 + 1e-6 * x.abs().max(y.abs()) {
                diffs.push(format!("{path}: {x} vs {y}"));
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                compare(&format!("{path}[{i}]"), u, v, diffs);
            }
        }
        (Value::Object(x), Value::Object(y)) if x.keys().eq(y.keys()) => {
            for (k, u) in x {
                compare(&format!("{path}.{k}"), u, &y[k], diffs);
            }
        }
        _ if a == b => {}
        _ => diffs.push(format!("{path}: {a} vs {b}")),
    }
}

#[test]
fn shipped_report_matches_golden_and_is_deterministic() {
    let cfg = configs().join("shipped.toml");
    let first = run_file(&cfg, &Overrides::default()).unwrap().to_json();
    let second = run_file(&cfg, &Overrides::default()).unwrap().to_json();
    assert!(first == second, "report body differs between runs");

    let golden: Value = serde_json::from_str(&std::fs::read_to_string(configs().join("shipped.golden.json")).unwrap()).unwrap();
    let fresh: Value = serde_json::from_str(&first).unwrap();
    let mut diffs = Vec::new();
    compare("", &fresh, &golden, &mut diffs);
    assert!(diffs.is_empty(), "{} differences, first: {:#?}", diffs.len(), &diffs[..diffs.len().min(10)]);
    assert_eq!(fresh["summary"]["pass"], true);
}
