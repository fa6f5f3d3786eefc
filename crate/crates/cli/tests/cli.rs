use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gz(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gz-tower"))
        .args(args)
        .current_dir(dir)
        .env_remove("GZ_TOWER_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("report on stdout is JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn classical_gz_and_shift_families() {
    let dir = tempfile::tempdir().unwrap();
    let out = gz(&["verify-classical", "--n", "3", "--family", "gz"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["schema"], "gz-tower/1");
    assert_eq!(r["status"], "ok");
    assert_eq!(r["config"]["n"], 3);
    assert_eq!(r["config"]["seed"], 0);
    assert_eq!(r["result"]["pairs"], 36);
    assert_eq!(r["result"]["rank"]["values"], serde_json::json!([9, 9, 9, 9, 9]));
    assert!(r["result"].get("witness").is_none_or(Value::is_null));

    let out = gz(&["verify-classical", "--n", "3", "--family", "mf", "--shift-matrix", "random-rational"], dir.path());
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert_eq!(r["config"]["shift_matrix"].as_array().unwrap().len(), 3);

    let out = gz(&["verify-classical", "--n", "2", "--family", "corner", "--side", "left"], dir.path());
    assert_eq!(code(&out), 0);
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["verify-classical", "--n", "0"][..],
        &["verify-quantum", "--n", "5"],
        &["orbit", "--n", "3", "--spectrum", "1,1,3"],
        &["orbit", "--n", "2", "--spectrum", "1,2,3"],
        &["flow", "--n", "3", "--hamiltonian", "4,1"],
        &["verify-classical", "--n", "2", "--family", "gz", "--shift-matrix", "identity"],
        &["verify-classical", "--n", "2", "--tol", "bogus=1"],
    ] {
        let out = gz(args, dir.path());
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
    let out = gz(&["verify-quantum", "--n", "5"], dir.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--allow-large"));
}

#[test]
fn quantum_reports_convention() {
    let dir = tempfile::tempdir().unwrap();
    for n in ["2", "3"] {
        let out = gz(&["verify-quantum", "--n", n], dir.path());
        assert_eq!(code(&out), 0);
        let r = report(&out);
        assert_eq!(r["result"]["status"], "ok");
        assert!(r["result"]["convention"].is_string());
        assert_eq!(r["result"]["diffop"]["failures"], 0);
    }
}

#[test]
fn orbit_canonical_and_residue_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = gz(&["orbit", "--n", "3", "--spectrum", "1,2,3", "--seed", "7"], dir.path());
    assert_eq!(code(&out), 0);
    let r = report(&out);
    let table = r["result"]["canonicity"]["table"].as_array().unwrap();
    // six γ (three of them Casimirs) and three θ, upper triangle with diagonal
    assert_eq!(table.len(), 45);
    assert_eq!(r["result"]["tower"]["levels"].as_array().unwrap().len(), 3);

    let out = gz(&["orbit", "--n", "2", "--spectrum", "1+i,-2", "--check", "residue-form"], dir.path());
    assert_eq!(code(&out), 0);
    let r = report(&out);
    assert!(!r["result"]["residue_form"]["winners"].as_array().unwrap().is_empty());
    assert!(r["result"].get("canonicity").is_none());
}

#[test]
fn flow_writes_trajectory_and_linearizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = gz(&["flow", "--n", "3", "--hamiltonian", "1,1", "--t", "0.1", "--steps", "200"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    let lines: Vec<Value> = fs::read_to_string(dir.path().join("flow-trajectory.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 201);
    for key in ["t", "u", "h", "tau", "branch_flags"] {
        assert!(lines[0].get(key).is_some(), "missing {key}");
    }
    let slopes = r["result"]["linearization"]["slopes"].as_array().unwrap();
    let conj = slopes.iter().find(|s| s["n"] == 1 && s["k"] == 1).unwrap();
    assert!((conj["slope"][0].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn casimir_flow_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("casimir.jsonl");
    let out = gz(
        &["flow", "--n", "3", "--hamiltonian", "3,2", "--steps", "50", "--trajectory", traj.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&traj).unwrap();
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let last: Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    let (a, b) = (first["u"].as_array().unwrap(), last["u"].as_array().unwrap());
    for (x, y) in a.iter().zip(b) {
        for c in 0..2 {
            assert!((x[c].as_f64().unwrap() - y[c].as_f64().unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn regularity_loss_exits_one_with_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = gz(&["flow", "--n", "3", "--hamiltonian", "1,1", "--t", "-40"], dir.path());
    assert_eq!(code(&out), 1);
    let r = report(&out);
    assert_eq!(r["status"], "violation");
    assert_eq!(r["result"]["error"]["kind"], "regularity_lost");
    let t = r["result"]["error"]["time"].as_f64().unwrap();
    assert!(t < 0.0 && t > -40.0);
}

#[test]
fn reports_are_deterministic_apart_from_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let strip = |p: &Path| {
        let text = fs::read_to_string(p).unwrap();
        assert_eq!(text.lines().filter(|l| l.trim_start().starts_with("\"timestamp\"")).count(), 1);
        text.lines().filter(|l| !l.trim_start().starts_with("\"timestamp\"")).collect::<Vec<_>>().join("\n")
    };
    let mut texts = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let out = gz(
            &["orbit", "--n", "3", "--seed", "11", "--check", "all", "--output", path.to_str().unwrap()],
            dir.path(),
        );
        assert_eq!(code(&out), 0);
        assert!(out.stdout.is_empty());
        texts.push(strip(&path).replace(name, "X"));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gz-tower"))
        .args(["flow", "--n", "2", "--steps", "40"])
        .current_dir(dir.path())
        .env("GZ_TOWER_OUTPUT_DIR", dir.path().join("runs"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("runs/flow.json")).unwrap()).unwrap();
    assert_eq!(r["command"], "flow");
    assert!(dir.path().join("runs/flow-trajectory.jsonl").exists());
}
