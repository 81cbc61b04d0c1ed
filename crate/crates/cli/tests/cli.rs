use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn prospect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prospect"))
        .args(args)
        .env_remove("PROSPECT_LOG")
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn prox_eval_huber_zero_region() {
    let v = stdout_json(&prospect(&[
        "prox-eval",
        "--kind",
        "huber",
        "--rho",
        "1",
        "--gamma",
        "1",
        "--eta",
        "-1",
        "--y",
        "0.5",
    ]));
    assert_eq!(v["eta"], 0.0);
    assert_eq!(v["y"], serde_json::json!([0.0]));
    assert_eq!(v["input"]["prox"]["rho"], 1.0);
    assert_eq!(v["input"]["gamma"], 1.0);
}

#[test]
fn prox_eval_quadratic_and_vapnik() {
    let v = stdout_json(&prospect(&[
        "prox-eval",
        "--kind",
        "quadratic",
        "--alpha",
        "2",
        "--gamma",
        "1",
        "--eta",
        "0",
        "--y",
        "2,0",
    ]));
    assert!((v["eta"].as_f64().unwrap() - 0.6956208).abs() < 1e-6);
    let v = stdout_json(&prospect(&[
        "prox-eval",
        "--kind",
        "vapnik",
        "--epsilon",
        "0.5",
        "--gamma",
        "1",
        "--eta",
        "1",
        "--y",
        "0.3",
    ]));
    assert_eq!(
        (v["eta"].as_f64().unwrap(), v["y"][0].as_f64().unwrap()),
        (1.0, 0.3)
    );
}

#[test]
fn prox_eval_separable_blocks() {
    let v = stdout_json(&prospect(&[
        "prox-eval",
        "--kind",
        "separable",
        "--inner",
        r#"{"kind":"huber","rho":1}"#,
        "--block",
        "2",
        "--gamma",
        "1",
        "--eta",
        "-1,1",
        "--y",
        "0.5,0.3",
    ]));
    assert_eq!(v["eta"].as_array().unwrap().len(), 2);
    assert_eq!(v["y"][0], serde_json::json!([0.0]));
}

#[test]
fn prox_eval_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"prox": {"kind": "huber", "rho": 1}, "gamma": 1, "eta": [-1], "y": [0.5]}"#,
    );
    let v = stdout_json(&prospect(&["prox-eval", "--config", &cfg, "--y", "3"]));
    assert_eq!(v["input"]["y"], serde_json::json!([3.0]));
    assert!(v["y"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn validation_failures_exit_2() {
    for args in [
        vec![
            "prox-eval",
            "--kind",
            "nope",
            "--gamma",
            "1",
            "--eta",
            "0",
            "--y",
            "1",
        ],
        vec![
            "prox-eval",
            "--kind",
            "huber",
            "--rho",
            "-1",
            "--gamma",
            "1",
            "--eta",
            "0",
            "--y",
            "1",
        ],
        vec![
            "prox-eval",
            "--kind",
            "huber",
            "--rho",
            "1",
            "--gamma",
            "0",
            "--eta",
            "0",
            "--y",
            "1",
        ],
        vec![
            "prox-eval",
            "--kind",
            "huber",
            "--rho",
            "1",
            "--gamma",
            "1",
            "--eta",
            "0",
            "--y",
            "1,2",
        ],
        vec!["no-such-command"],
    ] {
        assert_eq!(prospect(&args).status.code(), Some(2), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"prox": {"kind": "huber", "rho": 1}, "unknown": 1}"#,
    );
    assert_eq!(
        prospect(&["prox-eval", "--config", &cfg]).status.code(),
        Some(2)
    );
    let out = Command::new(env!("CARGO_BIN_EXE_prospect"))
        .args([
            "prox-eval",
            "--kind",
            "sqrt",
            "--gamma",
            "1",
            "--eta",
            "0",
            "--y",
            "1",
        ])
        .env("PROSPECT_LOG", "loud")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn identity_problem(dir: &Path) -> (String, String) {
    let x = write(
        dir,
        "x.csv",
        "1,0,0,0,0\n0,1,0,0,0\n0,0,1,0,0\n0,0,0,1,0\n0,0,0,0,1\n",
    );
    let z = write(dir, "z.csv", "3\n-2\n0\n0\n0\n");
    (x, z)
}

#[test]
fn trex_noiseless_identity_design_recovers_support() {
    let dir = tempfile::tempdir().unwrap();
    let (x, z) = identity_problem(dir.path());
    let out_dir = dir.path().join("out");
    let out = prospect(&[
        "trex",
        "--x",
        &x,
        "--z",
        &z,
        "--alpha",
        "0.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(out_dir.join("solution.csv")).unwrap();
    let support: Vec<bool> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap().abs() > 0.05)
        .collect();
    assert_eq!(support, vec![true, true, false, false, false]);
    let result: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("result.json")).unwrap())
            .unwrap();
    assert_eq!(result["config"]["alpha"], 0.5);
    assert_eq!(result["config"]["solver"]["gamma"], 70.0);
    assert_eq!(
        result["result"]["per_subproblem"].as_array().unwrap().len(),
        10
    );
}

#[test]
fn trex_rejects_q_one_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let (x, z) = identity_problem(dir.path());
    let out = prospect(&[
        "trex",
        "--x",
        &x,
        "--z",
        &z,
        "--q",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Sqrt-Lasso"));
}

#[test]
fn trex_malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let (_, z) = identity_problem(dir.path());
    let bad = write(dir.path(), "bad.csv", "1,0,0,0,0\n0,1,0,0,0\n0,0,x,0,0\n");
    let out = prospect(&[
        "trex",
        "--x",
        &bad,
        "--z",
        &z,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    let ragged = write(dir.path(), "ragged.csv", "1,0\n0\n");
    let out = prospect(&[
        "trex",
        "--x",
        &ragged,
        "--z",
        &z,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn trex_output_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.json",
        r#"{"model": {"n": 30, "p": 8, "m": 2, "sigma": 0.5, "corr": 0.3, "seed": 4}, "alpha": 0.7, "q": 1.5}"#,
    );
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let out_dir = dir.path().join(format!("w{workers}"));
        let out = prospect(&[
            "trex",
            "--config",
            &cfg,
            "--parallel",
            workers,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push((
            std::fs::read(out_dir.join("result.json")).unwrap(),
            std::fs::read(out_dir.join("solution.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn phase_transition_smoke_parses_back_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ph.json",
        r#"{"p": 16, "m": 2, "theta_grid": [0.4, 1.6], "q_list": [2.0], "alpha_grid": [0.5, 1.0, 1.5], "repetitions": 3}"#,
    );
    let mut csvs = Vec::new();
    for workers in ["1", "4"] {
        let path = dir.path().join(format!("ph{workers}.csv"));
        let out = prospect(&[
            "phase-transition",
            "--config",
            &cfg,
            "--parallel",
            workers,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        csvs.push(std::fs::read_to_string(&path).unwrap());
        let json: Value =
            serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap())
                .unwrap();
        assert_eq!(json["config"]["repetitions"], 3);
        assert_eq!(json["config"]["solver"]["tol"], 1e-5);
    }
    assert_eq!(csvs[0], csvs[1]);
    let mut lines = csvs[0].lines();
    assert_eq!(lines.next(), Some("config_id,seed,metric,value"));
    assert_eq!(lines.count(), 2 * 3 * 10);
}

#[test]
fn scaling_emits_timing_rows_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sc.csv");
    let out = prospect(&[
        "scaling",
        "--dims",
        "20,50",
        "--repetitions",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(&path).unwrap();
    for metric in ["time_dr", "time_dr_sel"] {
        let rows = csv
            .lines()
            .filter(|l| l.split(',').nth(2) == Some(metric))
            .count();
        assert_eq!(rows, 2 * 2, "{metric}");
    }
}

#[test]
fn selftest_small_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"oracle_draws": 5, "pair_draws": 200, "gate_draws": 200, "homogeneity_draws": 200, "moreau_draws": 200}"#,
    );
    let path = dir.path().join("s.csv");
    let out = prospect(&[
        "prox-selftest",
        "--config",
        &cfg,
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(&path).unwrap();
    let firm: Vec<f64> = csv
        .lines()
        .filter(|l| l.starts_with("suite=firm-nonexpansiveness") && l.contains(",max_violation,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(firm.len(), 9);
    assert!(firm.iter().all(|v| *v <= 1e-10));
}
