use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ullgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ullgm")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn simulated(dir: &Path, extra: &[&str]) -> PathBuf {
    let out = dir.join("sim");
    let mut args = vec!["simulate", "--n", "120", "--p", "10", "--seed", "3", "--out-dir", s(&out)];
    args.extend(extra);
    let o = ullgm(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

const SHORT: [&str; 4] = ["--iters", "400", "--burnin", "200"];

#[test]
fn fit_writes_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path(), &[]).join("dataset.csv");
    let out = tmp.path().join("fit");
    let mut args = vec!["fit", "--input", s(&data), "--outcome", "y", "--out-dir", s(&out), "--save-draws"];
    args.extend(SHORT);
    let o = ullgm(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let summary = read_csv(&out.join("summary.csv"));
    assert_eq!(summary[0], ["name", "pip", "beta_mean", "beta_sd"]);
    assert_eq!(summary.len(), 11);
    let scalars = read_csv(&out.join("scalars.csv"));
    let names: Vec<&str> = scalars[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["alpha", "sigma2", "g"]);
    assert_eq!(read_csv(&out.join("draws.csv")).len(), 201);
    let man: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(man["command"], "fit");
    assert_eq!(man["dataset"]["rows"], 120);
    assert_eq!(man["chain"]["store_beta"], true);
    assert_eq!(man["dataset"]["sha256"].as_str().unwrap().len(), 64);

    let pred = tmp.path().join("pred");
    let o = ullgm(&[
        "predict", "--fit-dir", s(&out), "--input", s(&data), "--outcome", "y", "--out-dir", s(&pred),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_csv(&pred.join("predictions.csv")).len(), 121);
    let lps = read_csv(&pred.join("lps.csv"));
    assert!(lps[1][2].parse::<f64>().unwrap().is_finite());
}

#[test]
fn simulate_run_emits_replicates_and_mean() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let mut args = vec![
        "simulate", "--n", "100", "--p", "10", "--run", "--replicates", "2", "--msize", "3", "--out-dir", s(&out),
    ];
    args.extend(SHORT);
    let o = ullgm(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&out.join("metrics.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[0][1..], ["size", "frac_true", "brier", "fnr", "fpr", "ln_g", "sigma2", "seconds"]);
    assert_eq!(rows[3][0], "mean");
}

#[test]
fn glm_truth_has_zero_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = simulated(tmp.path(), &["--dgp", "glm"]);
    let truth = read_csv(&dir.join("truth.csv"));
    let s2 = truth.iter().find(|r| r[0] == "sigma2").unwrap();
    assert_eq!(s2[1].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn cv_reports_every_split() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path(), &[]).join("dataset.csv");
    let out = tmp.path().join("cv");
    let mut args = vec!["cv", "--input", s(&data), "--outcome", "y", "--splits", "4", "--out-dir", s(&out)];
    args.extend(SHORT);
    let o = ullgm(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_csv(&out.join("cv_splits.csv")).len(), 5);
    let summary = read_csv(&out.join("cv_summary.csv"));
    assert_eq!(summary[0], ["splits", "test_share", "mean", "median", "min", "max"]);
    assert_eq!(summary[1][1], "0.15");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let data = simulated(dir, &[]).join("dataset.csv");
    let out = dir.join("o");

    // binomial without trials
    let o = ullgm(&["fit", "--input", s(&data), "--outcome", "y", "--family", "bil", "--out-dir", s(&out)]);
    assert_eq!(code(&o), 3);

    // malformed cell names its row and column
    let bad = dir.join("bad.csv");
    fs::write(&bad, "y,x1\n1,0.5\n2,abc\n0,1.0\n").unwrap();
    let o = ullgm(&["fit", "--input", s(&bad), "--outcome", "y", "--out-dir", s(&out)]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2") && err.contains("x1"), "{err}");

    // a single nonzero count violates the propriety conditions
    let sparse = dir.join("sparse.csv");
    fs::write(&sparse, "y,x1\n0,0.1\n0,0.7\n4,0.3\n0,0.9\n0,0.2\n").unwrap();
    let o = ullgm(&["fit", "--input", s(&sparse), "--outcome", "y", "--out-dir", s(&out)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));

    let o = ullgm(&["fit", "--input", s(&data), "--outcome", "y", "--gprior", "hyper-gn:1", "--out-dir", s(&out)]);
    assert_eq!(code(&o), 2);

    let o = ullgm(&["fit", "--input", s(&dir.join("missing.csv")), "--outcome", "y", "--out-dir", s(&out)]);
    assert_eq!(code(&o), 3);

    let o = ullgm(&["simulate", "--p", "5", "--out-dir", s(&out)]);
    assert_eq!(code(&o), 2);

    // holdout missing a training covariate
    let fit = dir.join("fit");
    let mut args = vec!["fit", "--input", s(&data), "--outcome", "y", "--save-draws", "--out-dir", s(&fit)];
    args.extend(SHORT);
    assert_eq!(code(&ullgm(&args)), 0);
    let holdout = dir.join("holdout.csv");
    fs::write(&holdout, "y,x1,x2\n1,0.1,0.2\n").unwrap();
    let o = ullgm(&["predict", "--fit-dir", s(&fit), "--input", s(&holdout), "--outcome", "y", "--out-dir", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulated(tmp.path(), &[]).join("dataset.csv");
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "iters = 300\nburnin = 100\nseed = 4\ngprior = \"fixed:50\"\n").unwrap();
    let out = tmp.path().join("fit");
    let o = ullgm(&[
        "fit", "--input", s(&data), "--outcome", "y", "--config", s(&cfg), "--seed", "8", "--out-dir", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let man: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(man["chain"]["seed"], 8);
    assert_eq!(man["chain"]["n_iter"], 300);
    assert_eq!(man["gprior"], "fixed:50");
}
