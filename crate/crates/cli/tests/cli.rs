//! End-to-end runs of the binary: each subcommand against a real scenario
//! file with its outputs parsed back, plus the documented exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn canm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_canm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn read_json(dir: &Path, name: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("reading {name}: {e}"));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parsing {name}: {e}"))
}

fn write_scenario(dir: &Path, body: &str) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(&path, body).expect("scenario written");
    path.to_str().expect("utf-8 path").to_owned()
}

const EXACT_SCENARIO: &str = r#"{
    "taus": [0.12, 0.55, 0.83],
    "powers": [1.0, 0.5, 2.0],
    "array": { "type": "cantor", "order": 3 }
}"#;

#[test]
fn cantor_reports_the_array_and_its_coarray() {
    let out = canm(&["cantor", "--order", "4"]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("order 4: 16 elements, aperture 28"), "{text}");
    assert!(text.contains("co-array complete: true"), "{text}");

    let dir = tempfile::tempdir().expect("tempdir");
    let out = canm(&["cantor", "--order", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    let payload = read_json(dir.path(), "cantor.json");
    assert_eq!(payload["ambient"], 10);
    assert_eq!(payload["complete"], true);
    assert_eq!(payload["elements"].as_array().unwrap().len(), 8);
    let manifest = read_json(dir.path(), "manifest.json");
    assert_eq!(manifest["command"], "cantor");
}

#[test]
fn recover_locates_the_sources_and_writes_outputs() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_scenario(dir.path(), EXACT_SCENARIO);
    let out = canm(&["recover", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");

    let payload = read_json(dir.path(), "estimate.json");
    assert_eq!(payload["status"], "converged");
    let worst = payload["truth_match"]["max_distance"].as_f64().unwrap();
    assert!(worst <= 1e-5, "worst frequency error {worst}");
    let objective = payload["objective"].as_f64().unwrap();
    assert!((objective - 3.5).abs() <= 1e-3, "objective {objective}");

    for name in ["estimate.csv", "dual_polynomial.csv", "manifest.json"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let manifest = read_json(dir.path(), "manifest.json");
    let outputs = manifest["outputs"].as_array().unwrap();
    assert!(outputs.len() >= 3, "{outputs:?}");
}

#[test]
fn certify_confirms_a_valid_scenario() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_scenario(dir.path(), EXACT_SCENARIO);
    let out = canm(&["certify", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("certified"), "{}", stdout(&out));
    let payload = read_json(dir.path(), "certificate.json");
    assert_eq!(payload["certified"], true);
}

#[test]
fn certify_rejects_too_many_sources() {
    // Nine sources against eight rows: the hypothesis p < M fails, the
    // command reports it and exits 1.
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_scenario(
        dir.path(),
        r#"{
            "taus": [0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85],
            "powers": [1, 1, 1, 1, 1, 1, 1, 1, 1],
            "array": { "type": "cantor", "order": 3 }
        }"#,
    );
    let out = canm(&["certify", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    assert!(stdout(&out).contains("p < M violated"), "{}", stdout(&out));
}

#[test]
fn doa_pipeline_runs_with_a_known_source_count() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_scenario(
        dir.path(),
        r#"{
            "taus": [0.2, 0.7],
            "powers": [1.0, 1.0],
            "array": { "type": "cantor", "order": 3 },
            "mode": "denoise",
            "lambda": 1.0,
            "snapshots": 200,
            "snr_db": 10.0,
            "seed": 7,
            "num_sources": 2
        }"#,
    );
    let out = canm(&["doa", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    let payload = read_json(dir.path(), "doa.json");
    let taus = payload["estimate"]["taus"].as_array().unwrap();
    assert_eq!(taus.len(), 2, "{taus:?}");
    let worst = payload["truth_match"]["max_distance"].as_f64().unwrap();
    assert!(worst <= 0.05, "worst matched error {worst}");
}

#[test]
fn bench_emits_one_row_per_order() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = canm(&[
        "bench",
        "--orders",
        "3",
        "--p",
        "3",
        "--trials",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.starts_with("order,"), "{text}");
    assert_eq!(text.trim_end().lines().count(), 2, "{text}");
    let payload = read_json(dir.path(), "bench.json");
    assert_eq!(payload["rows"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("bench.csv").is_file());
}

#[test]
fn schema_violations_exit_two() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_scenario(
        dir.path(),
        r#"{
            "taus": [0.2],
            "powers": [1.0],
            "array": { "type": "cantor", "order": 3 },
            "grid": 4096
        }"#,
    );
    let out = canm(&["recover", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    let out = canm(&["recover", "--config", "/nonexistent/scenario.json", "--out", "."]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}
