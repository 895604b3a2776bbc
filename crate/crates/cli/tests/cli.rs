use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn srpac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srpac")).args(args).env_remove("SRPAC_SEED").output().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn plan_reports_frame_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = srpac(&["plan", "--r", "2", "--epsilon", "0.01", "--p1", "0.05", "--P1", "0.95", "--p2", "0.05", "--P2", "0.95", "--eta", "0", "--out-dir", out]);
    assert!(o.status.success());
    let rep = json(&dir.path().join("bounds_report.json"));
    assert_eq!(rep["nd_approx"], 157);
    assert_eq!(rep["verdict"], "ok");
    assert_eq!(rep["units"]["epsilon"].as_str().map(|s| s.contains("LR")), Some(true));
}

#[test]
fn plan_with_exact_positions_needs_one_frame() {
    let dir = tempfile::tempdir().unwrap();
    let o = srpac(&["plan", "--epsilon", "0", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(json(&dir.path().join("bounds_report.json"))["nd_total"], 1);
}

#[test]
fn errors_are_one_parseable_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for (args, kind) in [
        (vec!["plan", "--epsilon", "0.3", "--out-dir", out], "domain"),
        (vec!["plan", "--epsilon", "abc"], "usage"),
        (vec!["simulate", "--scene", "/nonexistent.pgm", "--out-dir", out], "io"),
    ] {
        let o = srpac(&args);
        assert!(!o.status.success(), "{args:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        let lines: Vec<&str> = err.lines().collect();
        assert_eq!(lines.len(), 1, "{err}");
        assert!(lines[0].starts_with(&format!("srpac: error[{kind}]: ")), "{err}");
    }
}

#[test]
fn verify_rejects_zero_trials() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("cells.json");
    fs::write(&spec, r#"[{"r": 2, "epsilon": 0.01, "p": 0.1, "P": 0.9, "n": 16, "trials": 0, "seed": 1}]"#).unwrap();
    let o = srpac(&["verify", "--spec", spec.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("srpac: error[input]: "));
}

#[test]
fn verify_flags_halved_frame_count_without_crashing() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("cells.json");
    fs::write(
        &spec,
        r#"{"cells": [{"r": 2, "epsilon": 0.01, "p": 0.1, "P": 0.9, "n": 16, "trials": 40, "seed": 3, "nd_scale": 0.5}]}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = srpac(&["verify", "--spec", spec.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    let rep = json(&out.join("verify_report.json"));
    assert_eq!(rep[0]["nd_used"], 14);
}

#[test]
fn config_file_mirrors_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("plan.json");
    fs::write(&cfg, r#"{"r": 3, "epsilon": 0.001, "out_dir": "ignored"}"#).unwrap();
    let out = dir.path().join("o");
    let o = srpac(&["plan", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = json(&out.join("bounds_report.json"));
    assert_eq!(rep["config"]["r"], 3);
    assert_eq!(rep["nd_alias"], 12);
}

#[test]
fn seed_defaults_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_srpac"))
        .args(["simulate", "--side", "32", "--nd", "2", "--out-dir", out.to_str().unwrap()])
        .env("SRPAC_SEED", "77")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(json(&out.join("run_manifest.json"))["seed"], 77);
}

#[test]
fn exact_simulation_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = srpac(&["simulate", "--side", "64", "--r", "2", "--epsilon", "0", "--nd", "1", "--psf", "gaussian:0.5", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    let s = json(&out.join("summary.json"));
    assert!(s["max_rel_error"].as_f64().unwrap() < 1e-10);
}

#[test]
fn replay_detects_tampered_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert!(srpac(&["table1", "--psf", "dirac", "--out-dir", out.to_str().unwrap()]).status.success());
    let manifest = out.join("run_manifest.json");
    let ok = srpac(&["replay", manifest.to_str().unwrap(), "--out-dir", dir.path().join("r1").to_str().unwrap()]);
    assert!(ok.status.success());
    let mut m = json(&manifest);
    m["outputs"][0]["fnv64"] = serde_json::Value::String("0000000000000000".into());
    fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();
    let bad = srpac(&["replay", manifest.to_str().unwrap(), "--out-dir", dir.path().join("r2").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(4));
}
