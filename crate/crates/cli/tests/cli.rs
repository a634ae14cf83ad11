use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::Duration;

use bumprl::config::{RunConfig, RESOLVED_CONFIG_FILE};
use bumprl::harness::io::{read_csv, SweepCsvRow};
use bumprl::protocol::RemoteEnv;
use bumprl::Environment;

const TINY: &str = r#"{
  "train": {"episodes": 1, "max_steps": 60},
  "agent": {"warmup_steps": 30, "batch_size": 8, "hidden": [8]}
}"#;

fn bumprl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bumprl")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_config_exits_1_and_names_path() {
    let out = bumprl(&["train", "--config", "/no/such/config.json", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/config.json"));
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"vehicle": {"wheelbase": 1}}"#);
    let out = bumprl(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_writes_checkpoint_and_echoes_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("run");
    let out = bumprl(&["train", "--config", s(&cfg), "--episodes", "2", "--seed", "9", "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("checkpoint.json").exists());
    assert!(out_dir.join("train_metrics.csv").exists());
    assert!(out_dir.join("return_curve.csv").exists());
    let resolved = RunConfig::load(&out_dir.join(RESOLVED_CONFIG_FILE)).unwrap();
    assert_eq!(resolved.train.episodes, 2);
    assert_eq!(resolved.train.seed, 9);
    assert_eq!(resolved.output.dir, out_dir);

    // the checkpoint loads and evaluates
    let eval_dir = dir.path().join("eval");
    let out = bumprl(&[
        "eval",
        "--config",
        s(&cfg),
        "--checkpoint",
        s(&out_dir.join("checkpoint.json")),
        "--out",
        s(&eval_dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(eval_dir.join("metrics.csv").exists());
    assert!(eval_dir.join("trace_ep000.csv").exists());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let a = dir.path().join("a");
    assert!(bumprl(&["train", "--config", s(&cfg), "--seed", "4", "--out", s(&a)]).status.success());
    let b = dir.path().join("b");
    let resolved = a.join(RESOLVED_CONFIG_FILE);
    assert!(bumprl(&["train", "--config", s(&resolved), "--out", s(&b)]).status.success());
    assert_eq!(std::fs::read(a.join("train_metrics.csv")).unwrap(), std::fs::read(b.join("train_metrics.csv")).unwrap());
}

#[test]
fn eval_policy_flags_are_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let both = bumprl(&["eval", "--checkpoint", "x.json", "--constant-velocity", "1.0", "--out", s(&o)]);
    assert_eq!(both.status.code(), Some(1));
    let neither = bumprl(&["eval", "--out", s(&o)]);
    assert_eq!(neither.status.code(), Some(1));
}

#[test]
fn constant_velocity_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let out = bumprl(&["eval", "--constant-velocity", "1.0", "--out", s(&o)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["metrics.csv", "acceleration_series.csv", "velocity_series.csv", RESOLVED_CONFIG_FILE] {
        assert!(o.join(f).exists(), "{f}");
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("constant_1"));
}

#[test]
fn default_sweep_has_ten_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let out = bumprl(&["sweep", "--out", s(&o)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<SweepCsvRow> = read_csv(&o.join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[0].velocity, 0.1);
    assert_eq!(rows[9].velocity, 1.0);
    assert!(o.join("sweep_peak_series.csv").exists());
}

#[test]
fn zero_sweep_step_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = bumprl(&["sweep", "--step", "0", "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let o = dir.path().join("o");
    let out = bumprl(&["compare", "--config", s(&cfg), "--seeds", "1,2", "--out", s(&o)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(o.join("compare_report.txt")).unwrap();
    assert!(text.contains("seed audit consistent: true"));
    assert_eq!(std::fs::read_to_string(o.join("compare_report.csv")).unwrap().lines().count(), 1 + 6 + 3);
}

#[test]
fn unknown_flag_fails_fast() {
    let out = bumprl(&["train", "--epsiodes", "3"]);
    assert!(!out.status.success());
}

#[test]
fn help_lists_flags() {
    let out = bumprl(&["sweep", "--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in ["--config", "--min", "--max", "--step", "--out", "[default: 0.1]"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn serve_answers_hello_and_exits_on_close() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_bumprl"))
        .args(["serve", "--addr", "127.0.0.1:0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut stdout = BufReader::new(child.stdout.take().unwrap());
    let mut line = String::new();
    stdout.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_string();
    let mut env = RemoteEnv::connect(addr.as_str(), Duration::from_secs(10)).unwrap();
    assert_eq!(env.action_bounds(), (0.0, 2.0));
    env.reset(0).unwrap();
    env.step(1.0).unwrap();
    env.close().unwrap();
    assert!(child.wait().unwrap().success());
}
