use std::path::Path;
use std::process::{Command, Output};

use sepkit::harness::{exit_code, run, ConfigFile, ExperimentConfig, OutputFormat, EXIT_BUDGET, EXIT_CONFIG};
use sepkit::SepError;

fn sepkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepkit")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn missing_law_exits_with_config_status() {
    let o = sepkit(&["env", "--dims", "8"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(stderr(&o).contains("`law`"), "{}", stderr(&o));
}

#[test]
fn missing_horizon_is_named() {
    let o = sepkit(&["walk", "--law", "iid:1,2", "--dims", "8"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(stderr(&o).contains("`horizon`"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "law = \"iid:1,2\"\ndims = [8]\nhorizen = 3.0\n");
    let o = sepkit(&["env", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(stderr(&o).contains("horizen"));
}

#[test]
fn hdl_over_budget_exits_with_budget_status() {
    let o = sepkit(&[
        "hdl",
        "--law",
        "iid:1,2",
        "--n-grid",
        "64,128",
        "--t-grid",
        "0,0.1",
        "--event-cap",
        "1000",
    ]);
    assert_eq!(o.status.code(), Some(EXIT_BUDGET), "{}", stderr(&o));
}

#[test]
fn check_all_passes_and_writes_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = sepkit(&[
        "check-all",
        "--law",
        "iid:1,2,3",
        "--dims",
        "4,4",
        "--replicas",
        "300",
        "--format",
        "both",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(json["pass"], true);
    assert!(json["checks"].as_array().unwrap().len() >= 5);
    assert!(out.with_extension("csv").exists());
}

#[test]
fn config_file_and_flags_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "law = \"iid:1,2\"\ndims = [16]\nseed = 4\n");
    let o = sepkit(&["env", "--config", &cfg, "--seed", "5", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().next(), Some("site,x0,alpha"));
    assert_eq!(csv.lines().count(), 17);
    let o = sepkit(&[
        "env", "--law", "iid:1,2", "--dims", "16", "--seed", "5", "--format", "csv",
    ]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), csv);
}

#[test]
fn sep_runs_are_reproducible() {
    let args = [
        "sep",
        "--law",
        "iid:1,2",
        "--dims",
        "12",
        "--horizon",
        "2",
        "--replicas",
        "3",
        "--seed",
        "8",
    ];
    let a = sepkit(&args);
    let b = sepkit(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn thread_count_does_not_change_results() {
    let text = "command = \"homog\"\nlaw = \"iid:1,2\"\ndims = [256]\nhorizon = 20.0\nreplicas = 500\n";
    let mut a = ExperimentConfig::resolve(ConfigFile::parse(text).unwrap()).unwrap();
    let mut b = a.clone();
    a.threads = 1;
    b.threads = 3;
    assert_eq!(run(&a).unwrap().result, run(&b).unwrap().result);
}

#[test]
fn resolve_applies_command_defaults() {
    let file = ConfigFile::parse("command = \"homog\"\nlaw = \"const:1\"\ndims = [32]\nhorizon = 1.0\n").unwrap();
    let cfg = ExperimentConfig::resolve(file).unwrap();
    assert_eq!(cfg.replicas, 10_000);
    assert_eq!(cfg.threads, 1);
    assert_eq!(cfg.format, OutputFormat::Json);
}

#[test]
fn resolve_rejects_bad_values() {
    let bad = [
        "command = \"env\"\nlaw = \"iid:1,2\"\ndims = [8]\nthreads = 0\n",
        "command = \"sep\"\nlaw = \"iid:1,2\"\ndims = [8]\nhorizon = -1.0\n",
        "command = \"hdl\"\nlaw = \"iid:1,2\"\nn_grid = [8]\nt_grid = [-0.1]\n",
        "command = \"env\"\nlaw = \"iid:0,2\"\ndims = [8]\n",
    ];
    for text in bad {
        let e = ConfigFile::parse(text).and_then(ExperimentConfig::resolve).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG, "{text}: {e}");
    }
}

#[test]
fn error_classes_map_to_exit_codes() {
    assert_eq!(exit_code(&SepError::MissingField("law".into())), EXIT_CONFIG);
    assert_eq!(
        exit_code(&SepError::Budget {
            projected: 2.0,
            cap: 1.0
        }),
        EXIT_BUDGET
    );
    assert_eq!(exit_code(&SepError::TooLarge { size: 10, limit: 1 }), EXIT_BUDGET);
    assert_eq!(exit_code(&SepError::DegenerateSigma), 4);
}
