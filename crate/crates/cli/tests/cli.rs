use std::fs;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_orderfx");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("ORDERFX_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn last_number(text: &str) -> f64 {
    text.split(|c: char| c.is_whitespace() || c == '=').filter_map(|t| t.parse().ok()).next_back().unwrap()
}

#[test]
fn theory_c_in_range() {
    let o = run(&["theory", "c"]);
    assert!(o.status.success());
    let c = last_number(&stdout(&o));
    assert!((0.4110..=0.4128).contains(&c), "{c}");
}

#[test]
fn theory_functions() {
    let o = run(&["theory", "gamma-opt-m2", "--gamma-star", "0.5"]);
    assert!((last_number(&stdout(&o)) - 0.568_309_886_183_790_7).abs() < 1e-12);
    let o = run(&["theory", "thresholds", "--m", "100"]);
    assert!(stdout(&o).contains("0.2474"), "{}", stdout(&o));
    let o = run(&["theory", "approx", "--m", "50", "--gamma-star", "0.25"]);
    assert!(stdout(&o).starts_with("0.5 "), "{}", stdout(&o));
}

#[test]
fn theory_missing_argument_is_usage_error() {
    let o = run(&["theory", "psi"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--a"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = run(&["sweep", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["figure", "fig9"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["sweep", "--variance-mode", "unknown-both", "--n", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_runtime_error() {
    let o = run(&["sweep", "--m", "3", "--reps", "2", "--predictors", "direct", "--out", "/nonexistent/dir/r.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/dir/r.csv"));
}

#[test]
fn help_lists_every_flag() {
    let help = stdout(&run(&["sweep", "--help"]));
    for flag in [
        "--m ",
        "--n ",
        "--mu",
        "--sigma-u2",
        "--sigma-e2",
        "--gamma-star ",
        "--gamma-star-grid",
        "--f ",
        "--g ",
        "--variance-mode",
        "--predictors",
        "--posterior",
        "--draws-k",
        "--reps",
        "--seed",
        "--workers",
        "--scale",
        "--out",
        "--config",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
}

#[test]
fn two_area_sweep_finds_closed_form_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m2.csv");
    let o = run(&[
        "sweep",
        "--m",
        "2",
        "--gamma-star",
        "0.5",
        "--predictors",
        "linear@opt",
        "--reps",
        "100000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let side = fs::read_to_string(dir.path().join("m2.gamma.csv")).unwrap();
    let row: Vec<&str> = side.lines().nth(1).unwrap().split(',').collect();
    let gamma_opt: f64 = row[7].parse().unwrap();
    assert!((gamma_opt - 0.568_309_886).abs() <= 0.02, "{gamma_opt}");
}

#[test]
fn figure_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = run(&[
        "figure",
        "fig2S",
        "--reps",
        "4",
        "--draws-k",
        "20",
        "--seed",
        "42",
        "--gamma-star-grid",
        "0.2:0.4:0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,m,n,f_dist,g_dist,variance_mode,gamma_star,predictor,metric,value,std_error,replications,seed"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // 2 variants x 3 grid points x 4 predictors x 2 metrics
    assert_eq!(rows.len(), 48);
    assert!(rows.iter().all(|r| r.len() == 13 && r[0] == "fig2S" && r[11] == "4" && r[12] == "42"));
    assert!(rows.iter().all(|r| r[9].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn seed_sources_and_determinism() {
    let args = ["sweep", "--m", "5", "--reps", "50", "--predictors", "linear@star,empirical_best", "--draws-k", "10"];
    let a = stdout(&run(&[&args[..], &["--workers", "1"]].concat()));
    let b = stdout(&run(&[&args[..], &["--workers", "3"]].concat()));
    assert_eq!(a, b);
    let env = Command::new(BIN).args(args).env("ORDERFX_SEED", "99").output().unwrap();
    let flag = stdout(&run(&[&args[..], &["--seed", "99"]].concat()));
    assert_eq!(stdout(&env), flag);
    assert_ne!(flag, a);
}

#[test]
fn config_file_round_trip_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# two-area check\nm = 4\ngamma-star-grid = 0.3:0.5:0.2\npredictors = linear@star,direct\nreps = 30\nseed = 5\n\
         metrics = total_ordered_loss,mse_max\nworkers = 1\n",
    )
    .unwrap();
    let from_file = stdout(&run(&["sweep", "--config", cfg.to_str().unwrap()]));
    let from_flags = stdout(&run(&[
        "sweep",
        "--m",
        "4",
        "--gamma-star-grid",
        "0.3:0.5:0.2",
        "--predictors",
        "linear@star,direct",
        "--reps",
        "30",
        "--seed",
        "5",
        "--metrics",
        "total_ordered_loss,mse_max",
        "--workers",
        "1",
    ]));
    assert_eq!(from_file, from_flags);
    assert_eq!(from_file.lines().count(), 1 + 2 * 2 * 2);
    let overridden = stdout(&run(&["sweep", "--config", cfg.to_str().unwrap(), "--reps", "31"]));
    assert!(overridden.lines().skip(1).all(|l| l.contains(",31,5")), "{overridden}");
    let replaced = stdout(&run(&["sweep", "--config", cfg.to_str().unwrap(), "--predictors", "linear@0.3"]));
    let labels: Vec<&str> = replaced.lines().skip(1).map(|l| l.split(',').nth(7).unwrap()).collect();
    assert!(labels.iter().all(|p| *p == "linear@0.3"), "{labels:?}");
}

#[test]
fn bad_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "frobnicate = 3\n").unwrap();
    assert_eq!(run(&["sweep", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["sweep", "--config", "/no/such/file"]).status.code(), Some(1));
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("checks passed"));
}
