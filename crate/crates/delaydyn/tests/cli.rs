use std::path::Path;
use std::process::{Command, Output};

fn delaydyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delaydyn"))
        .args(args)
        .env("DELAYDYN_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn p(root: &Path, s: &str) -> String {
    root.join(s).display().to_string()
}

fn generate_small(root: &Path, n: usize) {
    std::fs::write(root.join("gen.json"), format!("{{\"n_epics\": {n}}}")).unwrap();
    let out = delaydyn(&["generate", "--config", &p(root, "gen.json"), "--out", &p(root, "data"), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = delaydyn(&["generate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_subcommand_is_usage_error() {
    assert_eq!(delaydyn(&[]).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    assert_eq!(delaydyn(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = p(dir.path(), "nowhere");
    let out = delaydyn(&["cluster", "--data", &missing, "--out", &p(dir.path(), "c.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&missing));
}

#[test]
fn invalid_k_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = delaydyn(&["cluster", "--data", &p(dir.path(), "d"), "--k", "zero", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dynamic_fit_without_clusters_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path(), 40);
    let out = delaydyn(&[
        "fit", "--data", &p(dir.path(), "data"), "--mode", "dynamic", "--out", &p(dir.path(), "m.json"), "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_csv_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path(), 20);
    let epics = dir.path().join("data/epics.csv");
    let text = std::fs::read_to_string(&epics).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "E0003,completed,not-a-date,,,,";
    std::fs::write(&epics, lines.join("\n")).unwrap();
    let out = delaydyn(&["cluster", "--data", &p(dir.path(), "data"), "--out", &p(dir.path(), "c.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epics.csv:4"));
}

#[test]
fn generate_then_evaluate_writes_pooled_rows() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    generate_small(root, 80);
    for f in ["epics.csv", "iterations.csv", "predictors.csv", "ground_truth.csv", "run_manifest.json"] {
        assert!(root.join("data").join(f).exists(), "{f}");
    }
    let out = delaydyn(&[
        "evaluate", "--data", &p(root, "data"), "--out", &p(root, "res"), "--seed", "3", "--chains", "2",
        "--warmup", "60", "--draws", "60",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = std::fs::read_to_string(root.join("res/results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some("split,mode,milestone,n,MAE,SA,mean_rwidth90"));
    let pooled = lines.filter(|l| l.starts_with("pooled,")).count();
    assert_eq!(pooled, 4 * 10);
    let comparisons = std::fs::read_to_string(root.join("res/comparisons.csv")).unwrap();
    assert!(comparisons.starts_with("milestone,mode_a,mode_b,wilcoxon_p,a12"));

    let out = delaydyn(&["report", "--results", &p(root, "res"), "--out", &p(root, "rep")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["wss_curve.csv", "centroid_bands.csv", "accuracy_by_milestone.csv", "rwidth_by_milestone.csv", "densities.csv"] {
        assert!(root.join("rep").join(f).exists(), "{f}");
    }
}

#[test]
fn fit_and_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    generate_small(root, 60);
    let out = delaydyn(&[
        "fit", "--data", &p(root, "data"), "--mode", "global-iter", "--out", &p(root, "m.json"), "--seed", "5",
        "--chains", "2", "--warmup", "80", "--draws", "80",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = delaydyn(&[
        "predict", "--model", &p(root, "m.json"), "--data", &p(root, "data"), "--milestone", "4", "--out", &p(root, "preds.csv"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let preds = std::fs::read_to_string(root.join("preds.csv")).unwrap();
    let mut lines = preds.lines();
    assert_eq!(lines.next(), Some("epic_id,milestone,mode,median,q05,q95,zero_probability"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], "4");
        assert_eq!(cols[2], "global-iter");
        let q05: f64 = cols[4].parse().unwrap();
        let med: f64 = cols[3].parse().unwrap();
        let q95: f64 = cols[5].parse().unwrap();
        assert!(q05 <= med && med <= q95);
    }
    let out = delaydyn(&[
        "predict", "--model", &p(root, "m.json"), "--data", &p(root, "data"), "--milestone", "11", "--out", "x.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
