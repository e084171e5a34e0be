use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gkcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gkcs")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

fn numbers(csv: &str, name: &str) -> Vec<f64> {
    column(csv, name).iter().map(|s| s.parse().unwrap()).collect()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn hydrogen_levels() {
    let o = gkcs(&["spectrum", "--model", "hydrogen_like", "--count", "5"]);
    assert!(o.status.success());
    let e = numbers(&stdout(&o), "e");
    let expected = [0.0, 0.75, 8.0 / 9.0, 0.9375, 0.96];
    assert_eq!(e.len(), 5);
    for (a, b) in e.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn harmonic_levels() {
    let o = gkcs(&["spectrum", "--model", "harmonic", "--count", "3"]);
    assert_eq!(numbers(&stdout(&o), "e"), vec![0.0, 1.0, 2.0]);
}

#[test]
fn decreasing_spectrum_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"kind": "explicit", "omega": 1.0, "levels": [0, 1, 3, 2.5, 4]}"#);
    let o = gkcs(&["spectrum", "--file", &bad]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("n=3") && err.contains("decreasing"), "{err}");
}

#[test]
fn hydrogen_variance_sweep_under_bound() {
    let o = gkcs(&["variance", "--model", "hydrogen_like", "--grid", "0.1:0.9:0.1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let v = numbers(&out, "variance");
    let bound = numbers(&out, "bound");
    assert_eq!(v.len(), 9);
    assert!(v.iter().zip(&bound).all(|(v, b)| v <= b));
    assert!(column(&out, "error").iter().all(String::is_empty));
}

#[test]
fn harmonic_variance_at_one() {
    let o = gkcs(&["variance", "--model", "harmonic", "--grid", "1", "--omega", "2"]);
    let out = stdout(&o);
    assert!((numbers(&out, "variance")[0] - 4.0).abs() < 1e-10);
    assert_eq!(column(&out, "bound"), vec![String::new()]);
}

#[test]
fn empty_grid() {
    let o = gkcs(&["variance", "--grid", ""]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "J,mean,variance,bound,tail_bound,error\n");
}

#[test]
fn per_point_failures_are_flagged() {
    let o = gkcs(&["variance", "--model", "hydrogen_like", "--grid", "0.5,1.5"]);
    assert!(o.status.success());
    let errors = column(&stdout(&o), "error");
    assert!(errors[0].is_empty());
    assert!(errors[1].contains("outside"));
}

#[test]
fn evolve_residuals() {
    let o = gkcs(&["evolve", "--model", "hydrogen_like", "--j", "0.5", "--gamma", "0", "--t", "3.7"]);
    assert!(o.status.success());
    assert!(numbers(&stdout(&o), "residual")[0] <= 1e-10);

    let o = gkcs(&["evolve", "--j", "0.3", "--gamma", "-1.2", "--t", "0"]);
    assert_eq!(numbers(&stdout(&o), "residual")[0], 0.0);

    let o = gkcs(&["evolve", "--j", "1.2", "--t", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside"));
}

#[test]
fn verify_builtins() {
    for model in ["harmonic", "hydrogen_like"] {
        let o = gkcs(&["verify", "--model", model]);
        let out = stdout(&o);
        assert!(o.status.success(), "{out}");
        assert!(!column(&out, "status").iter().any(|s| s == "fail"));
    }
    let out = stdout(&gkcs(&["verify", "--model", "harmonic"]));
    let checks = column(&out, "check");
    let status = column(&out, "status");
    let k = checks.iter().position(|c| c == "harmonic_reduction").unwrap();
    assert_eq!(status[k], "pass");
}

#[test]
fn verify_custom_without_measure_skips_moments() {
    let dir = tempfile::tempdir().unwrap();
    let levels: Vec<String> = (0..60).map(|n| format!("{}", 1.5 * (n * n) as f64)).collect();
    let doc = format!(r#"{{"name": "square", "kind": "explicit", "omega": 1.5, "levels": [{}]}}"#, levels.join(","));
    let file = write(dir.path(), "custom.json", &doc);
    let o = gkcs(&["verify", "--file", &file]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}");
    let checks = column(&out, "check");
    let status = column(&out, "status");
    for name in ["measure_moments", "unity_diagonal", "normalization_closed_form"] {
        let k = checks.iter().position(|c| c == name).unwrap();
        assert_eq!(status[k], "skipped", "{name}");
    }
}

#[test]
fn verify_reports_failing_measure() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", r#"{"U": 1.0, "density": {"kind": "constant", "value": 1.0}}"#);
    let o = gkcs(&["verify", "--model", "hydrogen_like", "--measure", &m]);
    assert_eq!(o.status.code(), Some(3));
    let out = stdout(&o);
    let checks = column(&out, "check");
    let k = checks.iter().position(|c| c == "measure_moments").unwrap();
    assert_eq!(column(&out, "status")[k], "fail");
}

#[test]
fn resolution_with_measure_document() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.json",
        r#"{"U": 1.0, "density": {"kind": "constant", "value": 0.5}, "atoms": [{"u": 1.0, "w": 0.5}]}"#,
    );
    let o = gkcs(&["resolution", "--model", "hydrogen_like", "--count", "30", "--measure", &m]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(numbers(&out, "rel_error").len(), 31);
    assert!(numbers(&out, "diagonal").iter().all(|d| (d - 1.0).abs() < 1e-9));

    let m = write(dir.path(), "exp.json", r#"{"U": "inf", "density": {"kind": "exponential"}}"#);
    let o = gkcs(&["resolution", "--model", "harmonic", "--measure", &m]);
    assert!(numbers(&stdout(&o), "rel_error").iter().all(|e| *e < 1e-9));
}

#[test]
fn output_is_deterministic_and_json_mirrors_csv() {
    let args = ["variance", "--model", "hydrogen_like", "--grid", "0.05:0.95:0.05"];
    assert_eq!(gkcs(&args).stdout, gkcs(&args).stdout);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json", "--out", out.to_str().unwrap()]);
    let o = gkcs(&json_args);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    let csv = numbers(&stdout(&gkcs(&args)), "variance");
    assert_eq!(rows.len(), csv.len());
    for (row, v) in rows.iter().zip(csv) {
        assert_eq!(row["variance"].as_f64().unwrap(), v);
    }
}

#[test]
fn seeds_change_sampled_checks_only() {
    let a = stdout(&gkcs(&["verify", "--model", "harmonic", "--seed", "1"]));
    let b = stdout(&gkcs(&["verify", "--model", "harmonic", "--seed", "2"]));
    assert_ne!(a, b);
    let norm = |s: &str| column(s, "value")[2].clone();
    assert_eq!(norm(&a), norm(&b));
}

#[test]
fn bad_arguments() {
    assert_eq!(gkcs(&["spectrum", "--nmax", "3"]).status.code(), Some(1));
    assert_eq!(gkcs(&["spectrum", "--tol", "0"]).status.code(), Some(1));
    assert_eq!(gkcs(&["variance", "--grid", "0:1"]).status.code(), Some(1));
    assert_eq!(gkcs(&["spectrum", "--model", "nope"]).status.code(), Some(1));
    assert_eq!(gkcs(&["spectrum", "--file", "/nonexistent/spectrum.json"]).status.code(), Some(1));
    assert!(gkcs(&["--help"]).status.success());
}

#[test]
fn state_amplitudes() {
    let o = gkcs(&["state", "--model", "hydrogen_like", "--j", "0.5", "--format", "json"]);
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    let c0 = rows[0]["re"].as_f64().unwrap();
    assert!((c0 - 0.638_248_712_618_26).abs() < 1e-12);
    assert!(rows.iter().all(|r| r["im"].as_f64().unwrap() == 0.0 && r["re"].as_f64().unwrap() >= 0.0));
    assert!(doc["meta"]["norm_deficit"].as_f64().unwrap() <= doc["meta"]["tail_mass_bound"].as_f64().unwrap());
}
