use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn chaincap(args: &[&str], envs: &[(&str, &str)]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaincap"))
        .args(args)
        .envs(envs.iter().copied())
        .output()
        .unwrap()
}

fn column<'a>(csv: &'a str, name: &str) -> Vec<&'a str> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap()).collect()
}

#[test]
fn closed_form_inline_point() {
    let out = chaincap(&["closed-form", "--rates", "0.2,0.4", "--a12", "0.2", "--a21", "0.8", "--quiet"], &[]);
    assert!(out.status.success());
    assert!(out.stderr.is_empty());
    let csv = String::from_utf8(out.stdout).unwrap();
    let r: f64 = column(&csv, "R_closed")[0].parse().unwrap();
    assert!((r - 0.455).abs() < 0.002);
}

#[test]
fn simulate_is_byte_identical_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str, threads: &str| {
        let path = dir.path().join(name);
        let out = chaincap(
            &[
                "simulate", "--rates", "0.2,0.3", "--alpha", "0.4", "--slots", "20000",
                "--replications", "3", "--seed", seed, "--out", path.to_str().unwrap(),
            ],
            &[("CHAINCAP_THREADS", threads)],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(path).unwrap()
    };
    let a = run("a.csv", "5", "0");
    assert_eq!(a, run("b.csv", "5", "1"));
    assert_ne!(a, run("c.csv", "6", "0"));
    assert!(!a.contains(&b'\r'));
}

#[test]
fn scenario_document_with_simulation_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    fs::write(
        &cfg,
        r#"{"miners":[{"rate":0.2},{"rate":0.4}],"links":[[0,0.2],[0.8,0]],
            "slots":50000,"seed":4,"rule":"longest-chain","replications":2}"#,
    )
    .unwrap();
    let out = chaincap(&["simulate", "--config", cfg.to_str().unwrap(), "--quiet"], &[]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(column(&csv, "seed"), ["4"]);
    assert_eq!(column(&csv, "replications"), ["2"]);
    let r: f64 = column(&csv, "R_sim")[0].parse().unwrap();
    assert!((r - 0.455).abs() < 0.02);
}

#[test]
fn empty_grid_is_rejected_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.json");
    fs::write(&cfg, r#"{"kind":"closed-form","grid":{"pairs":{"c1":[],"c2":[0.1]}}}"#).unwrap();
    let out_path = dir.path().join("out.csv");
    let out = chaincap(
        &["closed-form", "--config", cfg.to_str().unwrap(), "--out", out_path.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn failed_rows_set_exit_code() {
    let out = chaincap(&["closed-form", "--rates", "0.1,0.1,0.1", "--quiet"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(column(&csv, "error")[0].contains("2 miners"));
    assert_eq!(column(&csv, "R_closed"), [""]);
}

#[test]
fn edtmc_debug_dump() {
    let dir = tempfile::tempdir().unwrap();
    let states = dir.path().join("states.csv");
    let matrix = dir.path().join("matrix.csv");
    let out = chaincap(
        &[
            "edtmc", "--rates", "0.1,0.2,0.3", "--alpha", "0.5", "--k", "3", "--quiet",
            "--dump-states", states.to_str().unwrap(), "--dump-matrix", matrix.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success());
    let s = fs::read_to_string(&states).unwrap();
    assert!(s.starts_with("state_id,r_vector,pi,omega\n0,0|0|0,"));
    assert_eq!(s.lines().count(), 1 + 19);
    let pi: f64 = s.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap()).sum();
    assert!((pi - 1.0).abs() < 1e-12);
    assert_eq!(fs::read_to_string(&matrix).unwrap().lines().count(), 1 + 19);
}

#[test]
fn unknown_rule_is_reported_per_row() {
    let out = chaincap(&["simulate", "--rates", "0.1,0.1", "--slots", "1000", "--rule", "heaviest", "--quiet"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("unknown fork-choice rule"));
}

#[test]
fn shipped_config_runs_from_the_binary() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/derivative.json");
    let out = chaincap(&["sweep", "--config", cfg.to_str().unwrap(), "--quiet"], &[]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1 + 99 * 3);
}
