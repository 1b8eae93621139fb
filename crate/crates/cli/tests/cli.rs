use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn val(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_val"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn gen_blobs(path: &Path, per_class: &str) {
    let out = val(&[
        "gen-data",
        "--shape",
        "blobs",
        "--classes",
        "3",
        "--per-class",
        per_class,
        "--seed",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_data_writes_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    gen_blobs(&path, "7");
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "f1,f2,label");
    assert_eq!(lines.len(), 1 + 21);
}

#[test]
fn select_prints_k_distinct_indices_for_every_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    gen_blobs(&path, "10");
    for strategy in ["val", "random", "ted", "margin"] {
        let out = val(&["select", "--strategy", strategy, "--k", "4", "--data", path.to_str().unwrap()]);
        assert!(out.status.success(), "{strategy}: {}", String::from_utf8_lossy(&out.stderr));
        let mut picked: Vec<usize> = String::from_utf8(out.stdout)
            .unwrap()
            .lines()
            .map(|l| l.parse().unwrap())
            .collect();
        assert_eq!(picked.len(), 4, "{strategy}");
        picked.sort_unstable();
        picked.dedup();
        assert_eq!(picked.len(), 4, "{strategy}");
        assert!(picked.iter().all(|&i| i < 30));
    }
}

#[test]
fn select_accepts_label_column_by_index() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    fs::write(&path, "0,0.0,0.0\n0,0.1,0.0\n1,5.0,5.0\n1,5.1,5.0\n").unwrap();
    let out = val(&["select", "--strategy", "ted", "--k", "2", "--data", path.to_str().unwrap(), "--label-col", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}

#[test]
fn run_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    fs::write(
        &config,
        "data.per_class = 10\nstrategies = val, random\nbudgets = 2, 4\nrepeats = 2\noutput_dir = out\n",
    )
    .unwrap();
    let out = val(&["run", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/curve.csv")).unwrap();
    assert!(csv.starts_with("strategy,seed,budget,error_rate,queries_used,wall_ms\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 2);
    let svg = fs::read_to_string(dir.path().join("out/curve.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn verify_theory_reports_all_checks_passing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let out = val(&["verify-theory", "--trials", "10", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theorem,trials,violations,max_deviation,tolerance,passed"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.ends_with(",true")), "{text}");
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.cfg");
    fs::write(&config, "budgets = 5, 3\n").unwrap();
    assert_eq!(val(&["run", "--config", config.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(val(&["run", "--config", "/nonexistent/x.cfg"]).status.code(), Some(2));
    assert_eq!(val(&["select", "--strategy", "nope", "--k", "1", "--data", "x.csv"]).status.code(), Some(2));
    assert_eq!(val(&["verify-theory", "--trials", "0"]).status.code(), Some(2));
}

#[test]
fn infeasible_budget_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.cfg");
    fs::write(&config, "data.per_class = 4\nstrategies = val\nbudgets = 7\n").unwrap();
    let out = val(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("'val'"));
}

#[test]
fn malformed_data_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    fs::write(&path, "a,b,label\n1,2,x\n3,oops,y\n").unwrap();
    let out = val(&["select", "--strategy", "random", "--k", "1", "--data", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));
}

#[test]
fn repeated_select_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    gen_blobs(&path, "12");
    let args = ["select", "--strategy", "val", "--k", "5", "--data", path.to_str().unwrap(), "--seed", "9"];
    assert_eq!(val(&args).stdout, val(&args).stdout);
}
