use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bbm-ldp"));
    c.env_remove("BBM_LDP_WORKERS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn manifest(dir: &Path, csv: &str) -> Value {
    let path = dir.join(csv).with_extension("manifest.json");
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn rows(dir: &Path, csv: &str) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join(csv))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap()
}

#[test]
fn rate_row_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["rate", "--alpha", "0", "--out", "rate.csv"]);
    let r = rows(dir.path(), "rate.csv");
    assert_eq!(r[0], ["alpha", "v", "psi", "regime", "chen_bound"]);
    assert_eq!(r[1][2], "8.2842712474619029e-1");
    assert_eq!(r[1][3], "DELAYED_BRANCH_REGIME");

    let m = manifest(dir.path(), "rate.csv");
    assert_eq!(m["output"], "rate.csv");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    for key in ["sigma2", "alphas", "t_list", "n_trials", "seed", "dx", "dt", "eps", "no_branch_fraction"] {
        assert!(m["config"].get(key).is_some(), "manifest lacks {key}");
    }
    assert!(m["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn default_rate_grid_for_plots() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["rate"]);
    assert_eq!(rows(dir.path(), "rate.csv").len(), 452);
}

#[test]
fn tau_opt_fraction() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["tau-opt", "--alpha", "0", "--t", "500", "--out", "tau.csv"]);
    let r = rows(dir.path(), "tau.csv");
    let fraction: f64 = r[1][4].parse().unwrap();
    assert!((fraction - 0.7071).abs() < 0.01, "{fraction}");
}

#[test]
fn empty_t_list_is_config_invalid() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("in.csv"), "alpha,t,ln_u\n").unwrap();
    fs::write(dir.path().join("fit.json"), r#"{"t_list": [], "input": "in.csv"}"#).unwrap();
    let out = run(dir.path(), &["fit", "--config", "fit.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "config-invalid");
}

#[test]
fn bad_flags_and_files_are_config_invalid() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["mc-tail", "--alpha", "1.5"][..],
        &["tau-opt", "--t-list", "5,2"],
        &["rate", "--config", "missing.json"],
        &["rate", "--sigma2", "-1"],
        &["mc-tail", "--workers", "0"],
    ] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    fs::write(dir.path().join("typo.json"), r#"{"sigma": 2}"#).unwrap();
    assert_eq!(run(dir.path(), &["rate", "--config", "typo.json"]).status.code(), Some(2));
}

#[test]
fn precedence_flags_file_defaults() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"seed": 3, "n_trials": 300, "t": 1.5, "workers": 2}"#,
    )
    .unwrap();
    ok(dir.path(), &["mc-tail", "--config", "c.json", "--seed", "7", "--out", "m.csv"]);
    let m = manifest(dir.path(), "m.csv");
    assert_eq!(m["config"]["seed"], 7);
    assert_eq!(m["config"]["n_trials"], 300);
    assert_eq!(m["config"]["t_list"][0], 1.5);
    assert_eq!(m["config"]["sigma2"], 1.0);
    assert_eq!(m["workers"], 2);
    assert_eq!(m["seeds"], serde_json::json!([7]));
}

#[test]
fn worker_env_var_and_flag() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["mc-tail", "--t", "1", "--n-trials", "200", "--out", "w.csv"];
    let out = bin().current_dir(dir.path()).env("BBM_LDP_WORKERS", "3").args(args).output().unwrap();
    assert!(out.status.success());
    assert_eq!(manifest(dir.path(), "w.csv")["workers"], 3);
    let out = bin()
        .current_dir(dir.path())
        .env("BBM_LDP_WORKERS", "3")
        .args(args)
        .args(["--workers", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(manifest(dir.path(), "w.csv")["workers"], 2);
}

#[test]
fn estimator_output_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["scenario-lb", "--alpha", "0,-0.5", "--t-list", "2,3", "--n-trials", "2000", "--seed", "11", "--out", "s.csv"],
    );
    let r = rows(dir.path(), "s.csv");
    assert_eq!(
        r[0],
        ["estimator", "alpha", "t", "x", "n_trials", "p_hat", "log_p_hat", "stderr", "ess", "seed"]
    );
    assert_eq!(r.len(), 5);
    assert!(r[1..].iter().all(|row| row[0] == "scenario" && row[9] == "11"));

    let out = ok(dir.path(), &["replay", "s.manifest.json", "--workers", "3"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("identical"));
    ok(dir.path(), &["replay", "s.manifest.json", "--out", "again.csv"]);
    assert_eq!(fs::read(dir.path().join("s.csv")).unwrap(), fs::read(dir.path().join("again.csv")).unwrap());
    assert!(dir.path().join("again.manifest.json").exists());

    let mut text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    text.push_str("tampered\n");
    fs::write(dir.path().join("s.csv"), text).unwrap();
    let out = run(dir.path(), &["replay", "s.manifest.json"]);
    assert_eq!(out.status.code(), Some(6));
    assert_eq!(error_json(&out)["error"], "acceptance-fail");
}

#[test]
fn sweep_concatenates_in_config_order() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("sweep.json"),
        r#"{"n_trials": 1000, "seed": 5, "t": 2, "entries": [
            {"kind": "scenario_lb", "alphas": [0.2]},
            {"kind": "mc_tail", "alphas": [0.0], "seed": 9},
            {"kind": "mc_tail", "alphas": [-0.3], "t_list": [1, 2]}
        ]}"#,
    )
    .unwrap();
    ok(dir.path(), &["sweep", "--config", "sweep.json", "--workers", "3", "--out", "a.csv"]);
    ok(dir.path(), &["sweep", "--config", "sweep.json", "--workers", "1", "--out", "b.csv"]);
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());

    let r = rows(dir.path(), "a.csv");
    assert_eq!(r.len(), 5);
    assert_eq!(r[1][0], "scenario");
    assert_eq!((r[2][0].as_str(), r[2][9].as_str()), ("naive", "9"));
    assert_eq!(r[4][2], "2.0000000000000000e0");

    // The same entry alone gives the same row.
    ok(dir.path(), &["mc-tail", "--alpha", "0", "--t", "2", "--n-trials", "1000", "--seed", "9", "--out", "one.csv"]);
    assert_eq!(rows(dir.path(), "one.csv")[1], r[2]);

    let m = manifest(dir.path(), "a.csv");
    assert_eq!(m["config"]["entries"].as_array().unwrap().len(), 3);
    assert_eq!(m["seeds"], serde_json::json!([5, 9, 5]));
    assert_eq!(m["entry_seconds"].as_array().unwrap().len(), 3);
    ok(dir.path(), &["replay", "a.manifest.json"]);
    // Scratch files are cleaned up.
    let leftovers: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with('.'))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn sweep_rejects_mixed_layouts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("mixed.json"),
        r#"{"entries": [{"kind": "rate", "alphas": [0]}, {"kind": "tau_opt", "alphas": [0], "t": 10}]}"#,
    )
    .unwrap();
    assert_eq!(run(dir.path(), &["sweep", "--config", "mixed.json"]).status.code(), Some(2));
}

#[test]
fn particle_cap_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["mc-tail", "--t", "12", "--n-trials", "100", "--max-particles", "64"],
    );
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["error"], "particle-cap");
}

#[test]
fn fit_check_on_synthetic_series() {
    let dir = tempfile::tempdir().unwrap();
    let mut good = String::from("alpha,t,x_probe,ln_u,dx,dt,eps\n");
    let mut bad = good.clone();
    for t in [10.0f64, 20.0, 30.0, 40.0, 50.0, 60.0] {
        let psi0 = 2.0 * (2f64.sqrt() - 1.0);
        good += &format!("0,{t},0,{},0.1,0.0025,0.1\n", -(psi0 * t - 0.5 * t.ln()));
        bad += &format!("0,{t},0,{},0.1,0.0025,0.1\n", -(1.2 * psi0 * t));
    }
    fs::write(dir.path().join("good.csv"), good).unwrap();
    fs::write(dir.path().join("bad.csv"), bad).unwrap();

    let out = ok(dir.path(), &["fit", "--input", "good.csv", "--check", "--out", "fg.csv"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
    let r = rows(dir.path(), "fg.csv");
    assert_eq!(r[1][0], "fkpp");
    assert!(r[1][10].parse::<f64>().unwrap() <= 1e-9);

    let out = run(dir.path(), &["fit", "--input", "bad.csv", "--out", "fb.csv"]);
    assert!(out.status.success());
    let out = run(dir.path(), &["fit", "--input", "bad.csv", "--check", "--out", "fb.csv"]);
    assert_eq!(out.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));

    fs::write(dir.path().join("cols.csv"), "alpha,t,p\n0,1,0.5\n").unwrap();
    let out = run(dir.path(), &["fit", "--input", "cols.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["reason"], "missing-columns");
}

#[test]
fn pde_pipeline_slopes() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["fkpp-rate", "--alpha", "0,-1.8", "--t-list", "10,20,30,40,50,60", "--out", "pde.csv"],
    );
    let r = rows(dir.path(), "pde.csv");
    assert_eq!(r[0], ["alpha", "t", "x_probe", "ln_u", "dx", "dt", "eps"]);
    assert_eq!(r.len(), 13);

    ok(dir.path(), &["fit", "--input", "pde.csv", "--check", "--out", "fit.csv"]);
    let f = rows(dir.path(), "fit.csv");
    let a_neg: f64 = f[2][3].parse().unwrap();
    assert!((a_neg - 4.24).abs() / 4.24 <= 0.05, "{a_neg}");
    ok(dir.path(), &["replay", "fit.manifest.json"]);
}
