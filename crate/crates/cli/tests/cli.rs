use std::path::Path;
use std::process::{Command, Output};

fn toric(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toric"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.bin");
    let b = dir.path().join("b.bin");
    for path in [&a, &b] {
        let out = toric(&["generate", "--d", "5", "--p", "0.1", "--count", "20", "--seed", "4", "--out", s(path)]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn sweep_outputs_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rows.csv");
    let out = toric(&["sweep", "--d", "3,5", "--p", "0,0.1", "--samples", "100", "--csv", s(&csv)]);
    let v = json(&out);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["success_rate"], 1.0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "version = 1\ndistances = [3]\nerror_rates = [0.2]\nsamples = 30\n").unwrap();
    let v = json(&toric(&["sweep", "--config", s(&cfg)]));
    assert_eq!(v["rows"][0]["samples"], 30);
    let v = json(&toric(&["sweep", "--config", s(&cfg), "--samples", "40"]));
    assert_eq!(v["rows"][0]["samples"], 40);
    assert_eq!(v["rows"][0]["p"], 0.2);
}

#[test]
fn default_config_parses_back() {
    let out = toric(&["config"]);
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("default.toml");
    std::fs::write(&cfg, &out.stdout).unwrap();
    let v = json(&toric(&["sweep", "--config", s(&cfg), "--d", "3", "--p", "0", "--samples", "5"]));
    assert_eq!(v["rows"][0]["successes"], 5);
}

#[test]
fn train_evaluate_inspect_round() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("net.ckpt");
    let log = dir.path().join("log.csv");
    let data = dir.path().join("val.bin");
    let v = json(&toric(&[
        "train", "--d", "3", "--episodes", "20", "--eval-every", "10", "--validation-size", "20",
        "--checkpoint", s(&ck), "--log", s(&log),
    ]));
    assert_eq!(v["episodes"], 20);
    let v = json(&toric(&["train", "--d", "3", "--episodes", "25", "--validation-size", "20", "--checkpoint", s(&ck), "--log", s(&log), "--resume"]));
    assert_eq!(v["resumed"], true);
    assert_eq!(v["episodes"], 25);

    assert!(toric(&["generate", "--d", "3", "--p", "0.1", "--count", "30", "--out", s(&data)]).status.success());
    let v = json(&toric(&["evaluate", "--checkpoint", s(&ck), "--dataset", s(&data), "--records"]));
    assert_eq!(v["dqn"]["episodes"], 30);
    assert_eq!(v["dqn"]["records"].as_array().unwrap().len(), 30);
    assert_eq!(v["mwpm"]["samples"], 30);

    let v = json(&toric(&["inspect-q", "--checkpoint", s(&ck), "--syndrome", "0,0;0,1"]));
    assert_eq!(v["defects"].as_array().unwrap().len(), 2);
    assert!(v["greedy"]["direction"].is_string());
    let v = json(&toric(&["inspect-q", "--checkpoint", s(&ck), "--syndrome", ""]));
    assert!(v["defects"].as_array().unwrap().is_empty());

    let sweep = json(&toric(&["sweep", "--decoder", "dqn", "--checkpoint", s(&ck), "--d", "3", "--p", "0.05", "--samples", "20"]));
    assert_eq!(sweep["rows"][0]["decoder"], "dqn");
}

#[test]
fn asymptotics_reports_prediction() {
    let v = json(&toric(&["asymptotics", "--d", "3", "--p", "0.05,0.1", "--samples", "500"]));
    assert_eq!(v["coefficient"], 18.0);
    assert_eq!(v["exponent"], 2);
    assert_eq!(v["points"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    // configuration
    assert_eq!(toric(&["generate", "--d", "4", "--p", "0.1", "--count", "1", "--out", "x"]).status.code(), Some(2));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "version = 9\n").unwrap();
    assert_eq!(toric(&["sweep", "--config", s(&bad)]).status.code(), Some(2));
    // I/O and file format
    let missing = dir.path().join("missing.ckpt");
    assert_eq!(toric(&["inspect-q", "--checkpoint", s(&missing), "--syndrome", ""]).status.code(), Some(3));
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    assert_eq!(toric(&["inspect-q", "--checkpoint", s(&junk), "--syndrome", ""]).status.code(), Some(3));
    // contract: a d=3 checkpoint asked about a d=5 syndrome
    let ck = dir.path().join("net.ckpt");
    let log = dir.path().join("log.csv");
    assert!(toric(&["train", "--d", "3", "--episodes", "1", "--validation-size", "5", "--checkpoint", s(&ck), "--log", s(&log)]).status.success());
    assert_eq!(toric(&["inspect-q", "--checkpoint", s(&ck), "--d", "5", "--syndrome", "0,0;0,1"]).status.code(), Some(4));
    assert_eq!(toric(&["sweep", "--checkpoint", s(&ck), "--d", "5", "--p", "0.1", "--samples", "2"]).status.code(), Some(4));
}
