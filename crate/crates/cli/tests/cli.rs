//! End-to-end checks of the binary: exit codes, validation-before-output,
//! baseline conservation in the orbit dump, and byte determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn plaposc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plaposc"))
}

fn scenario_path(name: &str) -> String {
    format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn missing_scenario_file_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = plaposc()
        .args([
            "simulate",
            "--scenario",
            "/nonexistent/scenario.toml",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists(), "no output may be written on validation failure");
}

#[test]
fn hypothesis_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        "p = 3.0\na = 8.0\nb = 1.0\n[forcing]\nbeta = 1.0\ngamma = 0.6\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let output = plaposc()
        .args(["simulate", "--scenario"])
        .arg(&bad)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("gamma"),
        "stderr must cite the failed inequality, got: {stderr}"
    );
    assert!(!out.exists());
}

#[test]
fn baseline_orbit_has_constant_hamiltonian() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = plaposc()
        .args(["simulate", "--scenario", &scenario_path("baseline.toml"), "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let csv = fs::read_to_string(out.join("orbit.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, "t,x,y,xprime,hamiltonian");
    let h: Vec<f64> = lines
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert!(h.len() > 100);
    let h0 = h[0];
    for (i, v) in h.iter().enumerate() {
        assert!(
            ((v - h0) / h0.abs().max(1.0)).abs() < 1e-8,
            "Hamiltonian drifted at row {i}: {v} vs {h0}"
        );
    }
    assert!(out.join("run_manifest.txt").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("small.toml");
    fs::write(
        &scenario,
        r#"
p = 2.5
a = 5.0
b = 2.0
tol = 1e-9
seed = 7

[forcing]
beta = 1.0
gamma = 0.4
harmonics = [ { k = 1, c = 0.5 } ]

[bounded]
ics = 2
periods = 200
amp_min = 1e2
amp_max = 1e3
"#,
    )
    .unwrap();

    let run = |out: &Path| {
        let status = plaposc()
            .args(["bounded", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        fs::read(out.join("bounded.csv")).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    assert_eq!(a, b, "same scenario and seed must give identical bytes");
}

#[test]
fn rotation_of_baseline_matches_frac_omega() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = plaposc()
        .args(["rotation", "--scenario", &scenario_path("baseline.toml"), "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("rotation.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    let value: f64 = fields[1].parse().unwrap();
    let converged: bool = fields[3].parse().unwrap();
    // omega = 4/3 for (a, b, p) = (8, 1, 3)
    assert!((value - 1.0 / 3.0).abs() < 1e-6, "rotation {value}");
    assert!(converged);
}
