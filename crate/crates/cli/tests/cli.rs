use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn emguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emguard")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("emguard-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

#[test]
fn verify_passes_with_many_checks() {
    let v = json(&emguard(&["verify"]));
    assert_eq!(v["passed"], true);
    let checks = v["checks"].as_array().unwrap();
    assert!(checks.len() >= 20);
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn verify_reports_corrupted_qft() {
    let out = emguard(&["verify", "--corrupt-qft"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["failed"], serde_json::json!(["qft_unitarity"]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("qft_unitarity"));
}

#[test]
fn verify_with_smaller_sweep() {
    assert!(emguard(&["verify", "--d-max", "5"]).status.success());
    assert_eq!(emguard(&["verify", "--d-max", "40"]).status.code(), Some(2));
}

#[test]
fn decoy_reference_values() {
    let v = json(&emguard(&["decoy", "--d", "2", "--attack", "controlled-shift", "--trials", "10000"]));
    assert!((f(&v["p_exact"]) - 0.25).abs() < 1e-12);
    assert!((f(&v["leakage_bits"]) - 1.0).abs() < 1e-9);
    assert_eq!(v["predicate"]["undetectable"], false);

    let v = json(&emguard(&["decoy", "--d", "4", "--attack", "identity"]));
    assert!(f(&v["p_exact"]) < 1e-12);
    assert_eq!(v["detections"], 0);
    assert_eq!(v["predicate"]["undetectable"], true);
}

#[test]
fn decoy_is_deterministic_across_runs_and_threads() {
    let base = ["decoy", "--d", "3", "--attack", "haar", "--seed", "7"];
    let a = emguard(&base);
    let b = emguard(&base);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let one = emguard(&[&base[..], &["--threads", "1"]].concat());
    let four = emguard(&[&base[..], &["--threads", "4"]].concat());
    assert_eq!(one.stdout, a.stdout);
    assert_eq!(four.stdout, a.stdout);
    let other = emguard(&["decoy", "--d", "3", "--attack", "haar", "--seed", "8"]);
    assert_ne!(other.stdout, a.stdout);
}

#[test]
fn saved_attack_reloads_with_same_figures() {
    let path = scratch("haar.json");
    let p = path.to_str().unwrap();
    let first = json(&emguard(&["decoy", "--d", "3", "--danc", "2", "--attack", "haar", "--seed", "3", "--save-attack", p]));
    let second = json(&emguard(&["decoy", "--attack", "file", "--attack-file", p, "--seed", "3"]));
    for key in ["p_exact", "leakage_bits"] {
        assert!((f(&first[key]) - f(&second[key])).abs() <= 1e-12, "{key}");
    }
    assert_eq!(first["per_case"], second["per_case"]);
    assert_eq!(first["detections"], second["detections"]);
}

#[test]
fn params_attack_needs_matching_length() {
    let zeros = vec!["0"; 16].join(",");
    let v = json(&emguard(&["decoy", "--attack", "params", "--params", &zeros]));
    assert!(f(&v["p_exact"]) < 1e-12);
    assert_eq!(emguard(&["decoy", "--attack", "params", "--params", "0,1"]).status.code(), Some(2));
    assert_eq!(emguard(&["decoy", "--attack", "identity", "--params", "0"]).status.code(), Some(2));
}

#[test]
fn missing_attack_file_is_an_io_error_naming_the_path() {
    let out = emguard(&["decoy", "--attack", "file", "--attack-file", "/no/such/attack.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/attack.json"));
}

#[test]
fn ghz_reference_values() {
    let v = json(&emguard(&["ghz", "--d", "2", "--n", "2", "--eps", "orthogonal", "--mode", "sum-mod"]));
    assert!((f(&v["p_exact"]) - 0.5).abs() < 1e-12);
    assert!((f(&v["leakage_bits"]) - 1.0).abs() < 1e-9);

    for mode in ["all-equal", "sum-mod", "random"] {
        let v = json(&emguard(&["ghz", "--d", "3", "--n", "3", "--eps", "equal", "--mode", mode]));
        assert!(f(&v["p_exact"]) < 1e-12);
        assert!(f(&v["leakage_bits"]).abs() < 1e-9);
    }

    let v = json(&emguard(&["ghz", "--d", "3", "--n", "2", "--eps", "orthogonal", "--mode", "random"]));
    let mean = (f(&v["per_case"]["all_equal"]) + f(&v["per_case"]["sum_mod_zero"])) / 2.0;
    assert!((f(&v["p_exact"]) - mean).abs() < 1e-15);
}

#[test]
fn ghz_rejects_unnormalized_eps() {
    let path = scratch("eps.json");
    fs::write(&path, "[[[1.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [1.0, 0.0]]]").unwrap();
    let out = emguard(&["ghz", "--d", "2", "--eps", "file", "--eps-file", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    fs::write(&path, "[[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]").unwrap();
    let v = json(&emguard(&["ghz", "--d", "2", "--eps-file", path.to_str().unwrap(), "--mode", "sum-mod"]));
    assert!((f(&v["p_exact"]) - 0.5).abs() < 1e-12);
}

#[test]
fn constraint_records() {
    let v = json(&emguard(&["constraints", "--d", "3", "--sign", "neg"]));
    assert_eq!(v["rank_a"], 2);
    assert_eq!(v["kernel_is_all_ones"], true);

    let v = json(&emguard(&["constraints", "--d", "2", "--sign", "neg"]));
    assert!((f(&v["det_numeric"][0]) + 1.0).abs() < 1e-12);
    assert!(f(&v["det_numeric"][1]).abs() < 1e-12);

    let v = json(&emguard(&["constraints", "--d", "7", "--sign", "pos"]));
    let (nr, ni) = (f(&v["det_numeric"][0]), f(&v["det_numeric"][1]));
    let (cr, ci) = (f(&v["det_closed_corrected"][0]), f(&v["det_closed_corrected"][1]));
    let rel = ((nr - cr).powi(2) + (ni - ci).powi(2)).sqrt() / (nr * nr + ni * ni).sqrt();
    assert!(rel <= 1e-9);

    assert_eq!(emguard(&["constraints", "--d", "1"]).status.code(), Some(2));
    assert_eq!(emguard(&["constraints", "--sign", "zero"]).status.code(), Some(2));
}

#[test]
fn optimize_unconstrained_point() {
    let v = json(&emguard(&["optimize", "--d", "2", "--danc", "2", "--caps", "1.0"]));
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 1);
    assert!(f(&points[0]["achieved_leakage_bits"]) >= 0.9);
    assert_eq!(v["config"]["seed"], 0);
}

#[test]
fn optimize_csv_is_monotone_and_reproducible() {
    let args = ["optimize", "--caps", "1.0,0.01", "--format", "csv", "--restarts", "4", "--max-evals", "800", "--seed", "5"];
    let a = emguard(&args);
    let b = emguard(&[&args[..], &["--threads", "2"]].concat());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.lines().any(|l| l == "# seed: 5"));
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0][2] >= rows[1][2]);
    assert!(text.contains("cap,achieved_detection,leakage_bits,evals"));
}

#[test]
fn optimize_rejects_ascending_caps() {
    let out = emguard(&["optimize", "--caps", "0.01,1.0", "--restarts", "1", "--max-evals", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_flags_are_rejected() {
    assert_eq!(emguard(&["decoy", "--bogus"]).status.code(), Some(2));
    assert_eq!(emguard(&["nonsense"]).status.code(), Some(2));
    assert_eq!(emguard(&["constraints", "--n", "3"]).status.code(), Some(2));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let path = scratch("decoy-config.json");
    fs::write(&path, r#"{"d": 3, "attack": "controlled-shift", "trials": 100, "seed": 11}"#).unwrap();
    let p = path.to_str().unwrap();
    let v = json(&emguard(&["decoy", "--config", p, "--trials", "50"]));
    assert_eq!(v["config"]["d"], 3);
    assert_eq!(v["config"]["attack"], "controlled-shift");
    assert_eq!(v["config"]["trials"], 50);
    assert_eq!(v["config"]["seed"], 11);

    fs::write(&path, r#"{"d": 3, "colour": "blue"}"#).unwrap();
    assert_eq!(emguard(&["decoy", "--config", p]).status.code(), Some(2));
    assert_eq!(emguard(&["decoy", "--config", "/no/such/config.json"]).status.code(), Some(3));
}

#[test]
fn report_written_to_out_path() {
    let path = scratch("report.json");
    let out = emguard(&["constraints", "--d", "4", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["rank_a"], 3);
}

#[test]
fn numbers_carry_seventeen_significant_digits() {
    let out = emguard(&["constraints", "--d", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1.7320508075688772e0") || text.contains("1.7320508075688776e0"), "{text}");
}
