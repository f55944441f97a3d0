use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sharedrbf::data::load_covariates;
use sharedrbf::read_chain;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sharedrbf"))
}

fn tiny() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/tiny.csv")
        .to_str()
        .unwrap()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn small_fit(dir: &Path, extra: &[&str]) -> PathBuf {
    fit_with(dir, "200", extra)
}

fn fit_with(dir: &Path, n_iter: &str, extra: &[&str]) -> PathBuf {
    let data = tiny();
    let out = dir.to_str().unwrap();
    let mut args = vec![
        "fit", "--data", &data, "--n-iter", n_iter, "--n-burn", "120", "--n-fixed-gamma", "40", "--output", out,
    ];
    args.extend_from_slice(extra);
    ok(&args);
    dir.join("chain.jsonl")
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fit_writes_header_plus_retained_samples() {
    let dir = tempfile::tempdir().unwrap();
    let chain = small_fit(dir.path(), &[]);
    let text = std::fs::read_to_string(&chain).unwrap();
    assert_eq!(text.lines().count(), 1 + 80);
    for f in ["init_plan.json", "diagnostics.json", "fitted.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let fitted = read_csv(&dir.path().join("fitted.csv"));
    assert_eq!(fitted.len(), 60);
    assert_eq!(fitted[0].len(), 3 + 3);
}

#[test]
fn corrupt_csv_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x1,treatment,outcome\n0.1,1,2.0\nabc,2,1.0\n0.3,1,0.5\n").unwrap();
    let out = run(&["fit", "--data", bad.to_str().unwrap(), "--output", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error:"), "{err}");
    assert!(!dir.path().join("chain.jsonl").exists());
}

#[test]
fn missing_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("na.csv");
    std::fs::write(&bad, "x1,treatment,outcome\n0.1,1,2.0\nNA,2,1.0\n0.3,1,0.5\n").unwrap();
    let out = run(&["fit", "--data", bad.to_str().unwrap(), "--output", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_is_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let a = std::fs::read(small_fit(&dir.path().join("a"), &[])).unwrap();
    let b = std::fs::read(small_fit(&dir.path().join("b"), &[])).unwrap();
    let c = std::fs::read(small_fit(&dir.path().join("c"), &["--seed", "2"])).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn cate_matches_direct_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let chain_path = small_fit(dir.path(), &[]);
    let data = tiny();
    ok(&[
        "predict-cate", "--chain", chain_path.to_str().unwrap(), "--covariates", &data, "--pair", "3,1",
        "--output", dir.path().to_str().unwrap(),
    ]);
    let rows = read_csv(&dir.path().join("cate.csv"));

    let (_, chain) = read_chain(&chain_path).unwrap();
    let raw = load_covariates(&data, &chain.covariates.input_names()).unwrap();
    let x = chain.covariates.apply(&raw).unwrap();
    let range = chain.outcome.range();
    for (i, row) in rows.iter().enumerate() {
        let xi: Vec<f64> = x.row(i).iter().copied().collect();
        let mut draws: Vec<f64> = chain
            .samples
            .iter()
            .map(|s| range * (s.basis(2, &xi) - s.basis(0, &xi)))
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert_eq!(row[0] as usize, i + 1);
        assert!((row[1] - mean).abs() <= 1e-10 * mean.abs().max(1.0), "row {i}: {} vs {mean}", row[1]);
        draws.sort_by(f64::total_cmp);
        assert!(row[2] >= draws[0] - 1e-10 && row[3] <= draws[draws.len() - 1] + 1e-10);
        assert!(row[2] <= row[1] + 1e-10 && row[1] <= row[3] + 1e-10);
    }
}

#[test]
fn same_pair_gives_zero_effects() {
    let dir = tempfile::tempdir().unwrap();
    let chain = small_fit(dir.path(), &[]);
    let data = tiny();
    ok(&[
        "predict-cate", "--chain", chain.to_str().unwrap(), "--covariates", &data, "--pair", "2,2",
        "--output", dir.path().to_str().unwrap(),
    ]);
    for row in read_csv(&dir.path().join("cate.csv")) {
        assert_eq!(&row[1..], &[0.0, 0.0, 0.0]);
    }
}

#[test]
fn out_of_range_pair_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let chain = small_fit(dir.path(), &[]);
    let data = tiny();
    let out = run(&[
        "predict-cate", "--chain", chain.to_str().unwrap(), "--covariates", &data, "--pair", "4,1",
        "--output", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn single_sample_chain_collapses_interval() {
    let dir = tempfile::tempdir().unwrap();
    let chain = fit_with(dir.path(), "121", &[]);
    let data = tiny();
    ok(&[
        "predict-cate", "--chain", chain.to_str().unwrap(), "--covariates", &data,
        "--output", dir.path().to_str().unwrap(),
    ]);
    for row in read_csv(&dir.path().join("cate.csv")) {
        assert_eq!(row[1], row[2]);
        assert_eq!(row[1], row[3]);
    }
}

#[test]
fn blp_writes_coefficients_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let chain = small_fit(dir.path(), &[]);
    let data = tiny();
    ok(&[
        "blp", "--chain", chain.to_str().unwrap(), "--covariates", &data, "--thresholds", "0.5,1,2",
        "--output", dir.path().to_str().unwrap(),
    ]);
    let coef = std::fs::read_to_string(dir.path().join("blp_coefficients.csv")).unwrap();
    // intercept plus five covariates, each summarized over the samples
    assert_eq!(coef.lines().count(), 1 + 6);
    assert!(coef.starts_with("predictor,mean,q2.5,q50,q97.5"));
    let scores = std::fs::read_to_string(dir.path().join("blp_scores.csv")).unwrap();
    assert!(scores.lines().next().unwrap().contains("x5"));
}

#[test]
fn help_lists_defaults_and_unknown_flags_fail() {
    let out = ok(&["fit", "--help"]);
    let help = String::from_utf8_lossy(&out.stdout);
    assert!(help.contains("[default: 6000]"));
    assert!(help.contains("[default: 3000]"));
    let out = run(&["fit", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    let out = run(&["version"]);
    assert!(out.status.success());
}

#[test]
fn simulate_single_replication() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "simulate", "--n", "60", "--replications", "1", "--n-iter", "200", "--n-burn", "100",
        "--n-fixed-gamma", "40", "--methods", "shared-rbf,ols-t", "--pairs", "21",
        "--output", dir.path().to_str().unwrap(),
    ]);
    let report = std::fs::read_to_string(dir.path().join("sim_report.csv")).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("sim_summary.csv")).unwrap();
    // one record per method, and with one replication the median is that record
    assert_eq!(report.lines().count(), 1 + 2);
    assert_eq!(summary.lines().count(), 1 + 2);
    let mse = |line: &str| line.rsplit(',').next().unwrap().parse::<f64>().unwrap();
    let mut reported: Vec<f64> = report.lines().skip(1).map(|l| mse(l)).collect();
    let mut summarized: Vec<f64> = summary
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .collect();
    reported.sort_by(f64::total_cmp);
    summarized.sort_by(f64::total_cmp);
    assert_eq!(reported, summarized);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!("# small run\ndata = {}\nn_iter = 150\nn_burn = 100\nn_fixed_gamma = 20\nseed = 5\n", tiny()),
    )
    .unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["fit", "--config", cfg.to_str().unwrap(), "--n-iter", "130", "--output", out]);
    let text = std::fs::read_to_string(dir.path().join("chain.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1 + 30);
    assert!(text.lines().next().unwrap().contains("\"seed\":5"));

    std::fs::write(&cfg, "n_iter = 10\nbogus = 1\n").unwrap();
    let bad = run(&["fit", "--config", cfg.to_str().unwrap(), "--output", out]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 2"));
}
