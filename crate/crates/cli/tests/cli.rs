use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dtn-probe"))
}

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn validate_config_accepts_the_shipped_file() {
    let o = bin().arg("validate-config").arg(default_config()).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_config_exits_with_two_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(default_config()).unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, text.replace("points = 9", "points = 8")).unwrap();
    assert_ne!(std::fs::read_to_string(&bad).unwrap(), text, "sweep.points not found in default config");
    let o = bin().arg("validate-config").arg(&bad).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep.points"));

    std::fs::write(&bad, "seed = [").unwrap();
    let o = bin().arg("validate-config").arg(&bad).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_experiment_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--experiment", "nope", "--out"])
        .arg(dir.path())
        .arg("--config")
        .arg(default_config())
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--experiment", "lambda1", "--out"])
        .arg(dir.path())
        .arg("--config")
        .arg(default_config())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout.contains("overall: PASS"));
    assert!(dir.path().join("summary.json").is_file());

    let o = bin().arg("report").arg(dir.path()).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("lambda1"));
}
