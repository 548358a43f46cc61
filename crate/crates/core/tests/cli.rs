use std::path::Path;
use std::process::{Command, Output};

use ringphase::record::SimulationRecord;
use ringphase::sync::SyncSurface;
use serde_json::Value;

fn ringphase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringphase"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn analytic_prc_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "ppv.csv");
    let o = ringphase(&["prc", "--method", "analytic", "--node", "3", "--resolution", "64", "-o", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("phase,value\n"));
    assert_eq!(csv.lines().count(), 65);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(path(dir.path(), "ppv.json")).unwrap()).unwrap();
    assert_eq!(side["method"], "analytic");
    assert_eq!(side["resolution"], 64);
}

#[test]
fn invalid_method_is_a_usage_error() {
    let o = ringphase(&["prc", "--method", "spline"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_4_with_a_record() {
    let o = ringphase(&["simulate", "--model", "direct", "--lambda", "1,1", "--epsilon", "50", "--t-end", "5"]);
    assert_eq!(o.status.code(), Some(4));
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["error"], "instability");
}

#[test]
fn config_errors_exit_2() {
    let o = ringphase(&["simulate", "--lambda", "1,-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ringphase(&["prc", "--method", "malkin", "--ideal"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn free_running_direct_simulation() {
    let o = ringphase(&["simulate", "--model", "direct", "--lambda", "1", "--epsilon", "0"]);
    assert!(o.status.success());
    let r: SimulationRecord = serde_json::from_slice(&o.stdout).unwrap();
    assert!((r.frequencies[0] - 1.0).abs() < 0.02);
    assert_eq!(r.n, 1);
}

#[test]
fn weak_coupling_record_is_unlocked() {
    let o = ringphase(&["simulate", "--model", "phase", "--lambda", "1,0.95,1.05", "--epsilon", "0.2", "--format", "json"]);
    assert!(o.status.success());
    let r: SimulationRecord = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!r.locked);
    assert_eq!(r.seed, Some(0));
}

#[test]
fn symmetric_initial_state_warns() {
    let o = ringphase(&[
        "simulate", "--model", "direct", "--lambda", "1", "--init", "0,0,0", "--t-end", "2", "--window", "1",
    ]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("symmetric"));
}

#[test]
fn trajectory_csv_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "traj.csv");
    let o = ringphase(&["simulate", "--lambda", "1,1.05", "--epsilon", "0.1", "--t-end", "20", "-o", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("time,theta_1,theta_2\n"));
    let r: SimulationRecord = serde_json::from_str(&std::fs::read_to_string(path(dir.path(), "traj.json")).unwrap()).unwrap();
    assert_eq!(r.lambda, vec![1.0, 1.05]);
}

#[test]
fn prc_file_round_trips_into_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let prc = path(dir.path(), "ppv.csv");
    assert!(ringphase(&["prc", "-o", &prc]).status.success());
    let from_file = ringphase(&["simulate", "--lambda", "1,0.95,1.05", "--epsilon", "0.2", "--prc-file", &prc, "--format", "json"]);
    let builtin = ringphase(&["simulate", "--lambda", "1,0.95,1.05", "--epsilon", "0.2", "--format", "json"]);
    let a: SimulationRecord = serde_json::from_slice(&from_file.stdout).unwrap();
    let b: SimulationRecord = serde_json::from_slice(&builtin.stdout).unwrap();
    assert_eq!(a.frequencies, b.frequencies);

    let json = path(dir.path(), "ppv_full.json");
    assert!(ringphase(&["prc", "--format", "json", "-o", &json]).status.success());
    let c = ringphase(&["simulate", "--lambda", "1,0.95,1.05", "--epsilon", "0.2", "--prc-file", &json, "--format", "json"]);
    let c: SimulationRecord = serde_json::from_slice(&c.stdout).unwrap();
    assert_eq!(c.frequencies, b.frequencies);
}

#[test]
fn sweep_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "s.csv");
    let o = ringphase(&["sweep", "--grid", "3", "--epsilon", "0", "--periods", "20", "-o", &csv]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = SyncSurface::read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert!((s.get(0, 0) - (1.0 - 2.0 * 0.04)).abs() < 1e-9);

    for other in [csv.clone(), path(dir.path(), "s.json")] {
        let o = ringphase(&["compare", &csv, &other]);
        assert!(o.status.success());
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["rmse"], 0.0);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    for out in [&a, &b] {
        let o = ringphase(&["sweep", "--grid", "3", "--seed", "7", "--periods", "30", "--workers", "2", "-o", out]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(path(dir.path(), "a.json")).unwrap(),
        std::fs::read(path(dir.path(), "b.json")).unwrap()
    );
}

#[test]
fn malformed_surface_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.csv");
    std::fs::write(&bad, "lambda2,lambda3,S\n0.8,0.8,abc\n").unwrap();
    let o = ringphase(&["compare", &bad, &bad]);
    assert_eq!(o.status.code(), Some(3));
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(err["error"], "format");
    assert!(err["message"].as_str().unwrap().contains("`S`"));
}

#[test]
fn bench_reports_each_method() {
    let o = ringphase(&["bench", "--n", "2", "--trials", "2", "--t-end", "20", "--methods", "analytic", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["methods"].as_array().unwrap().len(), 1);
    assert!(v[0]["methods"][0]["speedup"].as_f64().unwrap() > 0.0);
}
