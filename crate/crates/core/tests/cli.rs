//! End-to-end tests of the `lameheat` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lameheat"))
        .args(args)
        .arg("--output")
        .arg(dir)
        .env("LAMEHEAT_THREADS", "2")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 4\ntheta = 0.5\nbogus_key = 1\n");
    let out = run(&["mesh", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn invalid_value_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "theta = 0.2\n");
    let out = run(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta"));
}

#[test]
fn mesh_writes_exports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 4\n");
    let out = run(&["mesh", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["mesh.txt", "mesh.csv", "faces.csv", "energy_matrix.txt", "generator_matrix.txt", "manifest.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let faces = fs::read_to_string(dir.path().join("faces.csv")).unwrap();
    assert_eq!(faces.lines().count(), 7);
    let mesh = fs::read_to_string(dir.path().join("mesh.csv")).unwrap();
    assert_eq!(mesh.lines().count(), 1 + 5 * 5 * 5);
    assert!(!dir.path().join("FAILED").exists());
}

#[test]
fn simulate_sample_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 4\ndt = 0.1\nt_final = 2.3\nsample_every = 4\n");
    let out = run(&["simulate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,E,Q,residual"));
    // 23 steps sampled every 4th, plus t = 0
    assert_eq!(lines.count(), 23 / 4 + 1);
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("command = simulate"));
    assert!(manifest.contains("status = pass"));
    assert!(manifest.contains("threads = 2"));
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = write_config(a.path(), "n = 4\nt_final = 1\n");
    for d in [&a, &b] {
        let out = run(&["simulate", "--config", &cfg, "--seed", "3"], d.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &Path| fs::read(d.join("energy.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn solver_error_leaves_failed_marker() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 4\neigen_count = 500\n");
    let out = run(&["spectrum", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("FAILED").exists());
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("status = error"), "{manifest}");

    // a later successful run clears the marker
    let cfg = write_config(dir.path(), "n = 4\neigen_count = 3\n");
    let out = run(&["spectrum", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("FAILED").exists());
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}
