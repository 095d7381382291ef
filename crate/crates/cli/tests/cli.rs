use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn chaining(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_chaining"));
    cmd.args(args).env_remove("SOURCE_DATE_EPOCH");
    if let Some(t) = threads {
        cmd.env("THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bounds_on_equilateral_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let dist = write(dir.path(), "tri.csv", "0,1,1\n1,0,1\n1,1,0\n");
    let cfg = write(dir.path(), "cfg.json", &format!(r#"{{"distances": "{dist}", "p": 1}}"#));
    let out = dir.path().join("r.json");
    let o = chaining(&["bounds", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    let dudley = r["results"]["dudley"]["value"].as_f64().unwrap();
    assert!((dudley - 1.4823).abs() < 1e-4, "{dudley}");
    assert_eq!(r["command"], "bounds");
}

#[test]
fn zero_trials_is_a_precondition_error() {
    let o = chaining(&["audit-moment", "--trials", "0"], None);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("precondition"), "{err}");
}

#[test]
fn jl_demo_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("jl.json");
    let o = chaining(&["jl", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    assert_eq!(r["results"]["m"], 1024);
    assert_eq!(r["results"]["n_points"], 2);
}

#[test]
fn reports_are_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"jl": {"source": "gaussian", "n_points": 6, "dim": 8, "m": 32}}"#);
    let mut outputs = Vec::new();
    // the output path is part of the echoed config, so every run writes the same file
    let out = dir.path().join("run.json");
    for threads in [None, Some("1"), Some("3")] {
        let o = chaining(&["jl", "--config", &cfg, "--seed", "7", "--trials", "5", "--out", out.to_str().unwrap()], threads);
        assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn config_echo_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let o = chaining(&["recover", "--seed", "3", "--out", first.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let original = std::fs::read(&first).unwrap();
    let echo = read_json(&first)["config"].clone();
    let cfg = write(dir.path(), "echo.json", &serde_json::to_string(&echo).unwrap());
    std::fs::remove_file(&first).unwrap();
    // the echo names the same output path, so the rerun recreates the file
    let o = chaining(&["recover", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(original, std::fs::read(&first).unwrap());
}

#[test]
fn csv_histogram_has_one_row_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"jl": {"source": "gaussian", "n_points": 7, "dim": 5, "m": 64}}"#);
    let out = dir.path().join("hist.csv");
    let o = chaining(&["jl", "--config", &cfg, "--trials", "3", "--format", "csv", "--out", out.to_str().unwrap()], None);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "i,j,ratio");
    assert_eq!(lines.len(), 1 + 7 * 6 / 2);
    assert!(dir.path().join("hist-verdicts.csv").exists());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let o = chaining(&["orlicz", "--out", "/nonexistent-dir/x/report.json"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("io_error"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"sede": 4}"#);
    let o = chaining(&["orlicz", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));
}

#[test]
fn inconsistent_instance_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "inst.json", r#"{"phi":[[1,0],[0,1]],"x_star":[1,0],"e":[0,0],"y":[2,0],"eta":0.5}"#);
    let cfg = write(dir.path(), "cfg.json", &format!(r#"{{"instance": "{inst}"}}"#));
    let o = chaining(&["recover", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("validation_error"));
}

#[test]
fn orlicz_report_and_failing_verdict_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.json");
    let o = chaining(&["orlicz", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let r = read_json(&out);
    assert_eq!(r["results"]["table"].as_array().unwrap().len(), 33);
    // an ε no projection can meet turns the JL verdict into an audit failure
    let cfg = write(dir.path(), "cfg.json", r#"{"jl": {"m": 1, "eps": 1e-6, "min_all_pairs_rate": 1.0}}"#);
    let o = chaining(&["jl", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
}
