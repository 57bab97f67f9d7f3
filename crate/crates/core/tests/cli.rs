use std::path::Path;
use std::process::{Command, Output};

use dampdet::eigensolver::spectrum_from_csv;
use serde_json::Value;

fn dampdet(dir: &Path, config: &str, command: &str) -> Output {
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_dampdet"))
        .args(["--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()])
        .args(["--command", command, "--quiet"])
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is one JSON object")
}

#[test]
fn malformed_config_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampdet(dir.path(), "{\"T\": 1,", "spectrum");
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config parse");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn negative_length_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampdet(dir.path(), r#"{"T": -1}"#, "det");
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config validation");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dampdet"))
        .args(["--config", dir.path().join("nope.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "usage");
}

#[test]
fn spectrum_command_constant_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampdet(dir.path(), r#"{"T": 1, "damping": {"kind": "constant", "value": 4}, "K": 10}"#, "spectrum");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["card_I2"], 2);

    let spectrum = spectrum_from_csv(&std::fs::read_to_string(dir.path().join("out/spectrum.csv")).unwrap()).unwrap();
    assert_eq!(spectrum.card_i2, 2);
    // j = 1 is real, j = 2, 3 are complex pairs below Im = 10
    assert_eq!(spectrum.total_multiplicity(), 6);
    let s2 = (4.0 * std::f64::consts::PI.powi(2) - 16.0).sqrt();
    assert!(spectrum.upper().any(|r| (r.value.re + 4.0).abs() < 1e-9 && (r.value.im - s2).abs() < 1e-9));
    let doc = read_json(&dir.path().join("out/spectrum.json"));
    assert_eq!(doc["records"].as_array().unwrap().len(), spectrum.records.len());
}

#[test]
fn det_command_constant_damping() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        dampdet(dir.path(), r#"{"T": 2, "damping": {"kind": "constant", "value": 1}, "methods": ["bfk_lift"]}"#, "det");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("out/determinant.json"));
    let r = &doc["results"]["bfk_lift"];
    assert!((r["value_re"].as_f64().unwrap() - 4.0).abs() < 1e-6);
    assert!(r["value_im"].as_f64().unwrap().abs() < 1e-6);
    assert!((doc["bfk"]["determinant"]["re"].as_f64().unwrap() + 16.0).abs() < 1e-6);
    assert_eq!(doc["epsilon_source"], "automatic");
}

#[test]
fn det_command_with_potential() {
    let dir = tempfile::tempdir().unwrap();
    let out = dampdet(dir.path(), r#"{"T": 1, "potential": {"kind": "constant", "value": -1}}"#, "det");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("out/determinant.json"));
    let v = doc["results"]["potential_cauchy"]["value_re"].as_f64().unwrap();
    assert!((v - 2.3504024).abs() < 1e-7, "{v}");
}

#[test]
fn below_positive_cut_flips_sign() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"T": 1, "damping": {"kind": "constant", "value": 0.5}, "cut": "below_positive_axis"}"#;
    let out = dampdet(dir.path(), cfg, "det");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("out/determinant.json"));
    for m in ["bfk_lift", "closed_form_zeta"] {
        assert!((doc["results"][m]["value_re"].as_f64().unwrap() + 2.0).abs() < 1e-6, "{m}");
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cfg = r#"{"T": 1.5, "damping": {"kind": "polynomial", "coefficients": [0.2, 0.7]}, "K": 12, "N": 5, "methods": ["bfk_lift", "relative_product"]}"#;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for command in ["spectrum", "det"] {
        assert!(dampdet(a.path(), cfg, command).status.success());
        assert!(dampdet(b.path(), cfg, command).status.success());
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 5);
    for name in names {
        let x = std::fs::read(a.path().join("out").join(&name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(&name)).unwrap();
        assert_eq!(x, y, "{name:?} differs");
    }
}

#[test]
fn verify_passes_on_sampled_profile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        r#"{"T": 1, "damping": {"kind": "sampled", "abscissae": [0, 0.5, 1], "ordinates": [0, 0.5, 1]}, "K": 15}"#;
    let out = dampdet(dir.path(), cfg, "verify");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = read_json(&dir.path().join("out/verify.json"));
    assert_eq!(doc["all_passed"], true);
}

#[test]
fn help_exits_zero() {
    let out = Command::new(env!("CARGO_BIN_EXE_dampdet")).arg("--help").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("--command"));
}
