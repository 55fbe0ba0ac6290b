//! End-to-end checks of the `agedyn` binary.

use std::path::Path;
use std::process::Command;

fn agedyn(root: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_agedyn")).env("AGEDYN_OUTPUT_ROOT", root).args(args).output().unwrap()
}

#[test]
fn empty_config_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, "{}").unwrap();
    let out = agedyn(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration"));
    // nothing was written
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn unknown_keys_and_figures_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"model": {"name": "example1"}, "operation": {"pip": {"n": 8}}, "colour": "red"}"#).unwrap();
    assert_eq!(agedyn(dir.path(), &["run", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(agedyn(dir.path(), &["reproduce", "fig3"]).status.code(), Some(2));
    assert_eq!(agedyn(dir.path(), &["pip", "--set", "operation.pip.lo=5"]).status.code(), Some(2));
    assert_eq!(agedyn(dir.path(), &["stability", "--model", "example1"]).status.code(), Some(2));
}

#[test]
fn run_writes_manifest_that_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"name": "example1"}, "operation": {"ibm": {"horizon": 3, "initial": {"count": 200}, "record_events": true}}, "output_dir": "a", "seed": 9}"#,
    )
    .unwrap();
    let out = agedyn(dir.path(), &["run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = dir.path().join("a");
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["operation"], "ibm");
    for f in manifest["artifacts"].as_array().unwrap() {
        assert!(a.join(f.as_str().unwrap()).exists());
    }
    // the manifest itself reproduces the run bit for bit
    let rerun = agedyn(dir.path(), &["run", a.join("manifest.json").to_str().unwrap(), "--set", "output_dir=b"]);
    assert!(rerun.status.success(), "{}", String::from_utf8_lossy(&rerun.stderr));
    for f in ["events.csv", "traits.csv", "mass.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn subcommand_overrides_and_seed_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = agedyn(
        dir.path(),
        &["tss", "--seed", "3", "--set", "operation.tss.horizon=2", "--set", "operation.tss.strips=false", "--set", "output_dir=\"t\""],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("t/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
    assert_eq!(m["config"]["operation"]["tss"]["horizon"], 2.0);
    assert!(dir.path().join("t/paths.csv").exists() && !dir.path().join("t/strips.csv").exists());
}

#[test]
fn failed_cross_check_exits_with_assertion_code() {
    let dir = tempfile::tempdir().unwrap();
    // an absurdly tight tolerance cannot be met by two independent numerical routes
    let out = agedyn(
        dir.path(),
        &["verify", "--set", "operation.verify.replicates=50", "--set", "operation.verify.tolerance=1e-300", "--set", "output_dir=\"v\""],
    );
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("v/verify.csv").exists() && dir.path().join("v/manifest.json").exists());
}

#[test]
fn reproduce_fig9_scan_reports_stable() {
    let dir = tempfile::tempdir().unwrap();
    let out = agedyn(dir.path(), &["reproduce", "fig9-scan"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("fig9-scan/stability/stability.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 39);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("0")));
}
