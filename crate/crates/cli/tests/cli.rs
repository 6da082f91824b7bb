use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gptkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gptkit")).args(args).output().expect("running gptkit")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn build_to(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name).to_string_lossy().into_owned();
    let mut full = vec!["build"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["-o", &path]);
    let out = gptkit(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn verdict<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["verdicts"].as_array().unwrap().iter().find(|v| v["name"] == name).unwrap_or_else(|| panic!("no verdict {name}"))
}

#[test]
fn sic_fixture_has_alpha_three() {
    let out = gptkit(&["build", "--fixture", "sic-d2"]);
    assert!(out.status.success());
    let file = json(&out);
    assert_eq!(file["alpha"].as_f64(), Some(3.0));
    assert_eq!(file["effects"].as_array().unwrap().len(), 4);
}

#[test]
fn random_build_is_byte_identical() {
    let args = ["build", "--space", "qc2", "--random-ic", "6", "--seed", "7"];
    let a = gptkit(&args);
    let b = gptkit(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["effects"].as_array().unwrap().len(), 6);
    let c = gptkit(&["build", "--space", "qc2", "--random-ic", "6", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn random_build_requires_seed() {
    let out = gptkit(&["build", "--space", "qc2", "--random-ic", "6"]);
    assert!(!out.status.success());
}

#[test]
fn sic_check_passes_with_known_deformation() {
    let dir = tempfile::tempdir().unwrap();
    let path = build_to(dir.path(), "sic.json", &["--fixture", "sic-d2"]);
    let out = gptkit(&["check", &path, "--p", "1", "--p", "2", "--p", "inf"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert!(report["verdicts"].as_array().unwrap().iter().all(|v| v["pass"] == true));
    for entry in report["born_matrices"].as_array().unwrap() {
        let p2 = entry["deformation"]["p2"].as_f64().unwrap();
        assert!((p2 - 12f64.sqrt()).abs() < 1e-9, "{p2}");
        assert!((entry["deformation"]["pinf"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    }
    assert_eq!(report["design"]["certified"], true);
    assert_eq!(report["morpho"]["is_morphophoric"], true);
}

#[test]
fn corrupted_states_fail_born_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = build_to(dir.path(), "sic.json", &["--fixture", "sic-d2"]);
    let mut file: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let x = file["states"][0][1].as_f64().unwrap();
    file["states"][0][1] = Value::from(0.5 * x);
    std::fs::write(&path, file.to_string()).unwrap();

    let out = gptkit(&["check", &path]);
    assert_eq!(out.status.code(), Some(1));
    let report = json(&out);
    assert_eq!(verdict(&report, "born_identity/natural")["pass"], false);
    assert_eq!(verdict(&report, "declared_alpha")["pass"], false);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("born_identity/natural"), "{stderr}");
}

#[test]
fn invalid_file_names_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"space": {"kind": "classical", "m": 3}, "effects": [[1.0, 0.5, 0.5]]}"#).unwrap();
    let out = gptkit(&["check", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("effects_sum_to_unit"), "{stderr}");
    assert!(stderr.contains("informationally_complete"), "{stderr}");
}

#[test]
fn real_trine_vectorized_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = build_to(dir.path(), "trine.json", &["--fixture", "real-trine"]);
    let out = gptkit(&["check", &path, "--real-vectorized"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["vectorized_born_identity"]["target"], "symmetric_projector");
    assert_eq!(verdict(&report, "vectorized_born_identity")["pass"], true);

    let sic = build_to(dir.path(), "sic.json", &["--fixture", "sic-d2"]);
    assert_eq!(gptkit(&["check", &sic, "--real-vectorized"]).status.code(), Some(2));
}

#[test]
fn minimize_on_mic_and_overcomplete_devices() {
    let dir = tempfile::tempdir().unwrap();
    let sic = build_to(dir.path(), "sic.json", &["--fixture", "sic-d2"]);
    let out = gptkit(&["minimize", &sic]);
    assert!(out.status.success());
    let report = json(&out);
    assert!(report["max_difference"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["protourgleichung"]["pass"], true);

    let pauli = build_to(dir.path(), "pauli.json", &["--fixture", "pauli6"]);
    let report = json(&gptkit(&["minimize", &pauli]));
    assert_eq!(report["numeric"]["provenance"], "minimal_frobenius");
    assert!(report["max_difference"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["protourgleichung"]["pass"], true);

    let out = gptkit(&["minimize", &pauli, "--p", "inf"]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["p"], "pinf");
    assert!(report.get("closed_form").is_none());
    assert!(report["numeric"]["residuals"]["born_identity"].as_f64().unwrap() < 1e-6);
}

#[test]
fn classical_identity_and_parallel_update_builds() {
    let out = gptkit(&["build", "--space", "classical4", "--identity"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["alpha"].as_f64(), Some(1.0));

    let dir = tempfile::tempdir().unwrap();
    let path = build_to(dir.path(), "pu.json", &["--space", "qc2", "--random-ic", "5", "--seed", "3", "--parallel-update"]);
    let out = gptkit(&["check", &path]);
    let report = json(&out);
    assert_eq!(verdict(&report, "born_identity/minimal_frobenius")["pass"], true);
}

#[test]
fn fixtures_list_names_every_fixture() {
    let out = gptkit(&["fixtures", "list"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["sic-d2", "sic-d3", "pauli6", "real-trine", "real-sic-d3"] {
        assert!(text.contains(name));
    }
}
