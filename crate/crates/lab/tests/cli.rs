mod common;

use std::fs;

use cdf_lab::registry;
use common::{cdf_lab, column, config, json, run};
use sha2::{Digest, Sha256};

#[test]
fn list_shows_every_experiment_and_its_required_keys() {
    let out = cdf_lab(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for e in registry::catalog() {
        assert!(text.contains(e.id.as_str()), "{}", e.id);
        assert!(text.contains(e.description));
        assert!(text.contains(&e.required_keys.join(", ")));
    }
    assert_eq!(registry::catalog().len(), 10);
}

#[test]
fn list_json_matches_registry() {
    let out = cdf_lab(&["list", "--json"]);
    assert!(out.status.success());
    let listed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(listed, serde_json::to_value(registry::catalog()).unwrap());
    let ids: Vec<&str> = listed.as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap()).collect();
    assert_eq!(
        ids,
        ["check", "simulate", "fourier-limit", "pea", "dispersion", "boundary-control", "master", "mass-action", "fokker-planck", "axonal"]
    );
}

#[test]
fn malformed_json_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{ \"experiment\": \"master\", ").unwrap();
    let out_dir = dir.path().join("out");
    let out = cdf_lab(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

fn run_text(text: &str) -> (std::process::Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = cdf_lab(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    (out, dir)
}

#[test]
fn schema_errors_name_the_key_path() {
    let cases = [
        (r#"{"experiment": "nope"}"#, "experiment"),
        (r#"{"experiment": "simulate", "model": {"system": "cattaneo", "grid": {"cellz": 10}}}"#, "model.grid"),
        (r#"{"experiment": "master", "model": {"random": {"count": "many"}}}"#, "model.random.count"),
        (r#"{"experiment": "pea", "solver": {"rtol": -1.0}}"#, "solver.rtol"),
        (r#"{"experiment": "check", "model": {"system": "cattaneo", "params": {"tau": 1.0}}}"#, "model.params"),
        (r#"{"experiment": "dispersion", "model": {"system": "custom"}}"#, "model.a"),
        (r#"{"experiment": "boundary-control", "model": {"gains": {"left": {"gains": [1.5]}}}}"#, "model.gains"),
    ];
    for (text, path) in cases {
        let (out, dir) = run_text(text);
        assert_eq!(out.status.code(), Some(2), "{text}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains(&format!("config error at {path}")), "{text}: {err}");
        assert!(!dir.path().join("out").exists());
    }
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"experiment": "axonal"}"#).unwrap();
    let out = cdf_lab(&["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("config error at output"));
}

#[test]
fn bad_overrides_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for extra in [["--tol", "-1"], ["--jobs", "0"]] {
        let out = run("master_2state.json", &dir.path().join("o"), &extra);
        assert_eq!(out.status.code(), Some(2), "{extra:?}");
        assert!(!dir.path().join("o").exists());
    }
}

#[test]
fn divergence_exits_3_and_keeps_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("step_limit.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
    let steps = column(&dir.path().join("diagnostics.csv"), "step");
    assert_eq!(steps.first(), Some(&0.0));
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["status"], "divergence");
    assert_eq!(m["files"][0]["path"], "diagnostics.csv");
}

#[test]
fn failed_acceptance_exits_4_with_outputs() {
    let (out, dir) = run_text(r#"{"experiment": "check", "model": {"system": "cattaneo", "expect_failures": ["a"]}}"#);
    assert_eq!(out.status.code(), Some(4));
    let m = json(&dir.path().join("out/manifest.json"));
    assert_eq!(m["exit_code"], 4);
    let failed: Vec<&str> =
        m["checks"].as_array().unwrap().iter().filter(|c| c["passed"] == false).map(|c| c["name"].as_str().unwrap()).collect();
    assert_eq!(failed, ["condition-a-flagged"]);
}

#[test]
fn manifest_lists_every_file_with_its_digest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("master_2state.json", dir.path(), &["--tol", "1e-9"]);
    assert!(out.status.success());
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["tolerance"], 1e-9);
    let cfg_digest = format!("{:x}", Sha256::digest(fs::read(config("master_2state.json")).unwrap()));
    assert_eq!(m["config_sha256"], cfg_digest.as_str());
    let mut listed: Vec<String> = Vec::new();
    for f in m["files"].as_array().unwrap() {
        let name = f["path"].as_str().unwrap();
        let bytes = fs::read(dir.path().join(name)).unwrap();
        assert_eq!(f["sha256"], format!("{:x}", Sha256::digest(&bytes)).as_str(), "{name}");
        assert_eq!(f["bytes"], bytes.len());
        listed.push(name.into());
    }
    let mut on_disk: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    listed.sort();
    assert_eq!(listed, on_disk);
}

#[test]
fn two_state_master_equation_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run("master_2state.json", dir.path(), &[]).status.success());
    let path = dir.path().join("trajectory.csv");
    let (t, p0, f) = (column(&path, "t"), column(&path, "p_0"), column(&path, "free_energy"));
    // Rates 2 (0 → 1) and 1 (1 → 0): p₀ = 1/3 + (2/3)e^{−3t}.
    for (tk, pk) in t.iter().zip(&p0) {
        assert!((pk - (1.0 / 3.0 + 2.0 / 3.0 * (-3.0 * tk).exp())).abs() < 1e-4, "t = {tk}");
    }
    assert!(f.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    // F(0) = Σ p ln(p/p_s) at p = (1, 0), p_s = (1/3, 2/3).
    assert!((f[0] - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn floats_use_seventeen_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run("master_2state.json", dir.path(), &[]).status.success());
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("0.0000000000000000e0,"), "{row}");
}

#[test]
fn every_shipped_config_parses() {
    let dir = config("");
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        cdf_lab::config::parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
