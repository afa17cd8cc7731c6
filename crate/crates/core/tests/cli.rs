use std::process::{Command, Output};

use serde_json::Value;

fn ddae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddae"))
        .args(args)
        .env_remove("DDAE_LOG")
        .output()
        .unwrap()
}

fn code(args: &[&str]) -> i32 {
    ddae(args).status.code().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn analyze_reports() {
    let out = ddae(&["analyze", "ex-split-index", "--param", "c=1"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["regular"], Value::Bool(true));
    assert_eq!(v["nu"], 1);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("identity.json");
    std::fs::write(&path, r#"{"E": [[1, 0], [0, 1]], "A": [[0, 0], [0, 0]]}"#).unwrap();
    let out = ddae(&["analyze", "--model", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(json(&out)["nu"], 0);

    let report = dir.path().join("report.json");
    assert_eq!(code(&["analyze", "ex-advanced", "--out", report.to_str().unwrap()]), 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["classification"]["tag"], "Advanced");
}

#[test]
fn classify_reports() {
    let v = json(&ddae(&["classify", "pmsd-hybrid"]));
    assert_eq!(v["classification"]["tag"], "Neutral");
    assert_eq!(v["classification"]["s"], 1);
    let v = json(&ddae(&["classify", "ex-shift"]));
    assert_eq!(v["classification"]["tag"], "Retarded");
    assert_eq!(code(&["classify", "ex-split-index"]), 2);
}

#[test]
fn exit_code_contract() {
    assert_eq!(code(&[]), 64);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 64);
    assert_eq!(code(&["analyze", "msd", "--param", "M"]), 64);
    assert_eq!(code(&["analyze", "msd", "--model", "msd"]), 64);
    assert_eq!(code(&["analyze", "no-such-model"]), 2);
    assert_eq!(code(&["analyze", "msd", "--param", "Q=1"]), 2);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ambiguous.json");
    std::fs::write(
        &path,
        r#"{"E": [[1, 0, 0], [0, 2e-10, 0], [0, 0, 5e-11]], "A": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}"#,
    )
    .unwrap();
    assert_eq!(code(&["analyze", path.to_str().unwrap()]), 3);

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, r#"{"E": [[1, 0]], "A": [[1]]}"#).unwrap();
    assert_eq!(code(&["analyze", broken.to_str().unwrap()]), 2);

    assert_eq!(code(&["simulate", "ex-advanced", "--T", "2"]), 4);
    assert_eq!(code(&["simulate", "pmsd-hybrid", "--history", "const:0,0,-1,0,0,0,3"]), 5);
    assert_eq!(code(&["simulate", "pmsd-hybrid", "--history", "const:0,1"]), 64);
    assert_eq!(code(&["simulate", "pmsd-hybrid", "--T", "-1"]), 64);
    assert_eq!(code(&["simulate", "ex-split-index"]), 2);
    assert_eq!(code(&["sweep", "pmsd-hybrid", "--tau", "0"]), 64);
    assert_eq!(code(&["sweep", "pmsd-hybrid", "--tau"]), 64);
    assert_eq!(code(&["sweep", "ex-shift", "--tau", "0.1"]), 2);
}

#[test]
fn simulate_writes_summary_and_csv() {
    let out = ddae(&["simulate", "ex-advanced", "--T", "2"]);
    assert_eq!(out.status.code(), Some(4));
    let v = json(&out);
    assert_eq!(v["status"], "BrokeDown");
    assert_eq!(v["breakpoint"], 1.0);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let out = ddae(&["simulate", "pmsd-hybrid", "--T", "0.25", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["status"], "Complete");
    assert!(v["max_residual"].as_f64().unwrap() <= 1e-8);
    assert!(v["audit"]["max_algebraic_residual"].as_f64().unwrap() <= 1e-8);
    let first = std::fs::read_to_string(&csv).unwrap();
    assert!(first.starts_with("t,z_1,z_2,z_3,z_4,z_5,z_6,z_7,segment_index,A_residual_norm\n"));

    // Data files are reproducible.
    let again = dir.path().join("again.csv");
    ddae(&["simulate", "pmsd-hybrid", "--T", "0.25", "--out", again.to_str().unwrap()]);
    assert_eq!(first, std::fs::read_to_string(&again).unwrap());

    let out = ddae(&["simulate", "ex-shift", "--T", "0.1", "--h", "0.01", "--history", "poly:0.5,1;1.5,3"]);
    assert!(out.status.success());
}

#[test]
fn sweep_rows_follow_requested_order() {
    let out = ddae(&["sweep", "pmsd-hybrid", "--tau", "0.025,0.1", "--tau", "0.05", "--T", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let taus: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(taus, ["0.025", "0.1", "0.05"]);
    assert!(text.lines().skip(1).all(|l| l.contains(",ok,")));
}

#[test]
fn list_names_every_model() {
    let out = String::from_utf8(ddae(&["list"]).stdout).unwrap();
    for name in ["msd", "pendulum", "pmsd-coupled", "pmsd-hybrid", "ex-split-index", "ex-coupled-index", "ex-shifted-index", "ex-shift", "ex-advanced"] {
        assert!(out.contains(name), "{name}");
    }
}
