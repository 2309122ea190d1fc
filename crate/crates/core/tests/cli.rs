use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dsparse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsparse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eval_of_a_dictionary_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dsparse(&["generate", "--out", path(dir.path()), "-p", "10", "--seed", "3"]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let truth = dir.path().join("dictionary.mat");
    let out = dsparse(&["eval", path(&truth), path(&truth), "--threshold", "1e-4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("fro_error,max_col_error,spectral_ratio,support_frac,recovered"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0");
    assert_eq!(row[4], "true");
}

#[test]
fn missing_experiment_config() {
    let out = dsparse(&["experiment", "--config", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}

#[test]
fn usage_errors() {
    assert_eq!(dsparse(&[]).status.code(), Some(1));
    assert_eq!(dsparse(&["learn"]).status.code(), Some(1));
    assert_eq!(dsparse(&["eval", "a.mat", "b.mat", "--threshold", "x"]).status.code(), Some(1));
    assert_eq!(dsparse(&["--version"]).status.code(), Some(0));
}

#[test]
fn unreadable_matrix_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mat");
    fs::write(&bad, "2 2\n1 2 3").unwrap();
    let out = dsparse(&["eval", path(&bad), path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.mat"));
}

#[test]
fn bad_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"init": {"ratio": 2.0}}"#).unwrap();
    let out = dsparse(&["generate", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_learn_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = dsparse(&["generate", "--seed", "1", "--out", path(d), "-p", "5000"]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));

    let run_dir = d.join("run");
    let init = dsparse(&["init", path(&d.join("samples.mat")), "--seed", "1", "--out", path(&run_dir)]);
    assert!(init.status.success(), "{}", String::from_utf8_lossy(&init.stderr));
    let stats = fs::read_to_string(run_dir.join("init_stats.txt")).unwrap();
    assert!(stats.contains("accepted=64"), "{stats}");

    let learned = d.join("learned");
    let learn = dsparse(&[
        "learn",
        path(&d.join("samples.mat")),
        "--seed",
        "1",
        "--out",
        path(&learned),
        "--truth",
        path(&d.join("dictionary.mat")),
    ]);
    assert!(learn.status.success(), "{}", String::from_utf8_lossy(&learn.stderr));
    let trace = fs::read_to_string(learned.join("trace.csv")).unwrap();
    assert!(trace.starts_with("step,max_col_err,grad_fro,wall_ms\n"));
    assert_eq!(trace.lines().count(), 26);

    let out = dsparse(&[
        "eval",
        path(&d.join("dictionary.mat")),
        path(&learned.join("dictionary.mat")),
        "--threshold",
        "1e-4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with(",true"), "{text}");
}

#[test]
fn experiment_writes_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    let csv = dir.path().join("out.csv");
    fs::write(
        &cfg,
        r#"{"model": {"n": 64, "m": 64, "k": 6, "r": 2, "structure": "block_diagonal"},
            "methods": ["ours"], "sample_sizes": [2000], "trials": 1, "success_threshold": 1e-4}"#,
    )
    .unwrap();
    let out = dsparse(&["experiment", "--config", path(&cfg), "--out", path(&csv), "--no-timing"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,p,recovery_rate,mean_fro_error,mean_wall_s,trials"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!((row[0], row[1], row[4], row[5]), ("ours", "2000", "0", "1"));
    assert!(row[2] == "0" || row[2] == "1");
    assert!(!dir.path().join("out.csv.tmp").exists());
}
