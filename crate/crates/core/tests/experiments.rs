use gevrey_lab::experiments::{run, validate, Experiment, ExperimentConfig, RunManifest};
use gevrey_lab::Error;

#[test]
fn config_json_round_trip() {
    let text = r#"{"experiment": "cellular-singularity", "times": [0.5, 1.0], "dt": 0.001, "labels": 8}"#;
    let c = ExperimentConfig::from_json(text).unwrap();
    assert_eq!(c.kind().unwrap(), Experiment::CellularSingularity);
    let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back.times, Some(vec![0.5, 1.0]));
    validate(Experiment::CellularSingularity, &c).unwrap();
}

#[test]
fn misaligned_times_rejected() {
    let mut c = ExperimentConfig::new(Experiment::CellularSingularity);
    c.dt = Some(0.3);
    assert!(matches!(validate(Experiment::CellularSingularity, &c), Err(Error::Validation(_))));
}

#[test]
fn small_cellular_run_manifest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::new(Experiment::CellularSingularity);
    c.out = Some(dir.path().to_path_buf());
    c.times = Some(vec![0.5, 1.0]);
    c.dt = Some(1e-3);
    c.labels = Some(8);
    c.n = Some(256);
    let m = run(&c).unwrap();
    let stored: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(stored.checks.len(), m.checks.len());
    assert!(stored.complete);
    let rows = std::fs::read_to_string(dir.path().join("cellular_radius.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
    assert!(rows.starts_with("t,"));
}
