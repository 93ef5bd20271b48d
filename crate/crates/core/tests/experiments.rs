use std::path::Path;

use dtn_probe::experiment::{run, RunConfig, RunReport};
use dtn_probe::Error;

fn shipped_config() -> RunConfig {
    RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")).unwrap()
}

#[test]
fn shipped_config_is_the_default() {
    let c = shipped_config();
    assert_eq!(c, RunConfig::default());
    c.validate().unwrap();
}

#[test]
fn unknown_experiment_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = run(&RunConfig::default(), "nope", dir.path(), 1).unwrap_err();
    assert!(matches!(err, Error::Config(ref m) if m.contains("nope")), "{err}");
}

#[test]
fn invalid_fields_are_named() {
    let mut c = RunConfig::default();
    c.sweep.points = 4;
    let err = c.validate().unwrap_err().to_string();
    assert!(err.contains("sweep.points"), "{err}");
    let mut c = RunConfig::default();
    c.geometry.r1 = c.geometry.r0 - 0.1;
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    assert!(matches!(RunConfig::from_toml_str("seed = \"x\""), Err(Error::ConfigParse(_))));
}

#[test]
fn lambda1_run_writes_report_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&shipped_config(), "lambda1", dir.path(), 1).unwrap();
    assert!(report.passed);
    for f in ["summary.json", "lambda1.csv", "plots.json"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let back = RunReport::read(dir.path()).unwrap();
    assert_eq!(back.outcomes.len(), 1);
    assert_eq!(back.outcomes[0].name, "lambda1");
    assert_eq!(back.config, report.config);
}
