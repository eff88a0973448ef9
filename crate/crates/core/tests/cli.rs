use std::fs;
use std::path::Path;
use std::process::Command;

fn sonlab() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sonlab"));
    c.env("RUST_LOG", "warn");
    c
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    let text = format!(
        "training_days = 1\nevaluation_days = 1\nseeds = [3]\noutput_dir = {:?}\n\n[scenario.mobility]\nmax_users = 12\n\n[scenario.timing]\nslots_per_interval = 20\n",
        dir.join("out")
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn bad_config_reports_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "training_days = 0\n").unwrap();
    let out = sonlab().args(["simulate", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let last = stderr.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(last).unwrap();
    assert_eq!(v["error"], "config");
    assert!(v["message"].as_str().unwrap().contains("at least one day"));
}

#[test]
fn simulate_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = sonlab().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("out/dflt/seed-3");
    let trace = fs::read_to_string(run.join("kpi_trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 2 * 96);
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary[0]["method"], "dflt");
    assert_eq!(summary[0]["unsafe_actions"], 0);

    let out = sonlab().args(["evaluate", "--method", "dflt", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["mean"]["failure_reduction_pct"], 0.0);
    assert!(report["mean"]["tput_anomaly_pct"].is_null());
}
