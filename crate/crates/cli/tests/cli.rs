use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gevrey-lab"))
}

#[test]
fn majorant_config_run_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "majorant-table", "trials": 10, "comb_m_max": 2, "stirling_n_max": 20, "seed": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["--serial", "--out"])
        .arg(&out)
        .arg("run")
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["complete"], true);
    assert_eq!(manifest["config"]["seed"], 3);
    assert!(out.join("majorant_times.csv").exists());
}

#[test]
fn invalid_config_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "strip-rotation", "dt": -1.0}"#).unwrap();
    let out = dir.path().join("out");
    let o = bin().arg("--out").arg(&out).arg("run").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt must be positive"));
    assert!(!out.exists());
}

#[test]
fn radius_probe_prints_fit() {
    let o = bin().args(["radius", "--t", "1", "--n", "256"]).output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("exact"));
}
