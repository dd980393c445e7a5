use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ld_lattice::io::read_checkpoint;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ld-lattice"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("LD_LATTICE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn geometry_reports_admissibility_and_optimality() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["geometry", "--N", "3", "--s-over-q1", "1"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("admissible, m=1, flux 2pi*3"), "{text}");
    assert!(text.contains("commensurate-optimal (odd case)"));

    let o = run(&["geometry", "--q", "1.3"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("inadmissible"));
}

#[test]
fn unknown_keys_and_mismatched_commands_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"command": "geometry", "kapa": 1.0}"#).unwrap();
    let o = run(&["geometry", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));

    fs::write(&cfg, r#"{"command": "sweep"}"#).unwrap();
    let o = run(&["geometry", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_coupling_minimization_has_zero_energy() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["minimize", "--N", "2", "--r", "0", "--Mx", "32", "--Mz", "4"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["energy"].as_f64().unwrap().abs() < 1e-10);
    let (header, cfg) = read_checkpoint(dir.path(), "checkpoint").unwrap();
    assert_eq!(header.planes, cfg.f.len());
}

#[test]
fn finite_layer_minimization_writes_every_plane() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["minimize", "--kind", "finite_layer", "--N", "4", "--r", "1e-2", "--Mx", "32", "--Mz", "4"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let planes = fs::read_to_string(dir.path().join("planes.csv")).unwrap();
    for n in 0..=4 {
        assert!(planes.lines().any(|l| l.starts_with(&format!("{n},"))));
    }
}

#[test]
fn non_convergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &["minimize", "--N", "2", "--r", "1e-2", "--Mx", "32", "--Mz", "4", "--max-iters", "1", "--grad-tol", "1e-15"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(dir.path().join("checkpoint.json").exists());
}

#[test]
fn frustration_scan_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run(&["frustration", "--n-max", "3", "--s-points", "6"], dir.path());
        assert!(o.status.success());
    }
    let x = fs::read(a.path().join("phase_diagram.csv")).unwrap();
    let y = fs::read(b.path().join("phase_diagram.csv")).unwrap();
    assert_eq!(x, y);
    assert_eq!(String::from_utf8(x).unwrap().lines().count(), 1 + 3 * 6);
}

#[test]
fn sweep_and_export_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sweep", "--s-over-q1", "1", "--Mx", "32", "--Mz", "8"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("relative error"));
    assert_eq!(fs::read_to_string(dir.path().join("sweep.csv")).unwrap().lines().count(), 4);
    let o = run(&["export", "--N", "2", "--Mx", "16", "--Mz", "4"], dir.path());
    assert!(o.status.success());
    assert!(dir.path().join("predicted_field.csv").exists());
    let o = run(&["asymptotic", "--N", "2", "--s-over-q1", "0.5"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("C0 + C1 F"));
}
