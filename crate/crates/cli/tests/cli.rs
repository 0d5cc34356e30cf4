use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn rtlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtlab"))
        .args(args)
        .env_remove("RTLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, body: Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

fn small_grid(dir: &Path) -> String {
    write_config(
        dir,
        json!({"experiment": "verify-grid", "params": {"N": 7, "periods": 1, "window": [0, 4]}}),
    )
}

#[test]
fn list_names_every_experiment() {
    let out = rtlab(&["list", "--json"]);
    assert!(out.status.success());
    let infos: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = infos.iter().map(|i| i["name"].as_str().unwrap()).collect();
    for n in [
        "verify-grid",
        "verify-norms",
        "verify-kernels",
        "birkhoff",
        "wiener-wintner",
        "cotlar",
        "return-times",
        "bourgain-L",
        "bourgain-J",
        "tree-select",
        "wavepacket",
        "model-op",
        "sign-lower-bound",
        "transfer-constants",
    ] {
        assert!(names.contains(&n), "{n}");
    }
    assert_eq!(names.len(), 14);
}

#[test]
fn validate_accepts_shipped_configs() {
    let mut seen = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let out = rtlab(&["validate", "--config", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
        seen += 1;
    }
    assert_eq!(seen, 14);
}

#[test]
fn shipped_configs_are_complete() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let shipped: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        let out = rtlab(&["validate", "--config", path.to_str().unwrap(), "--json"]);
        let filled: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(shipped["params"], filled, "{}", path.display());
    }
}

#[test]
fn validate_rejects_negative_n() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({"experiment": "verify-grid", "params": {"N": -41}}));
    let out = rtlab(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verify-grid"));
    let cfg = write_config(dir.path(), json!({"experiment": "birkhoff", "params": {"N": -5}}));
    assert_eq!(rtlab(&["validate", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(rtlab(&["no-such-experiment", "--out", out]).status.code(), Some(2));
    let cfg = write_config(dir.path(), json!({"experiment": "birkhoff", "params": {"tolerence": 0.1}}));
    assert_eq!(rtlab(&["birkhoff", "--config", &cfg, "--out", out]).status.code(), Some(2));
    assert_eq!(rtlab(&["cotlar", "--config", &cfg, "--out", out]).status.code(), Some(2));
    assert_eq!(rtlab(&["birkhoff", "--kernel", "bump", "--out", out]).status.code(), Some(2));
    assert_eq!(rtlab(&["birkhoff"]).status.code(), Some(2));
    assert!(!Path::new(out).exists());
}

#[test]
fn run_writes_report_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_grid(dir.path());
    let out = dir.path().join("out");
    let res = rtlab(&["verify-grid", "--config", &cfg, "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["spec"]["seed"], json!(9));
    assert_eq!(report["spec"]["params"]["N"], json!(7));
    assert_eq!(report["verdict"], json!("pass"));
    assert!(report["operations"].as_array().unwrap().iter().all(|o| o["anchor"].is_string()));
    let cells = fs::read_to_string(out.join("cells.csv")).unwrap();
    assert!(cells.starts_with("index,group,label,x,seed,measured,reference,fit_exponent,stderr\n"));
    assert!(out.join("plotdata/intervals.csv").exists());
}

#[test]
fn fail_verdict_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        json!({"experiment": "birkhoff", "params": {"N": 997, "interval": [0.0, 0.3], "tolerance": 1e-9}}),
    );
    let out = dir.path().join("out");
    let res = rtlab(&["birkhoff", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stdout).contains("FAIL birkhoff-average"));
    assert!(out.join("report.json").exists());
}

#[test]
fn threads_env_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_grid(dir.path());
    let out = dir.path().join("out");
    let run = |env: Option<&str>, flag: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_rtlab"));
        c.args(["verify-grid", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", flag]);
        match env {
            Some(v) => c.env("RTLAB_THREADS", v),
            None => c.env_remove("RTLAB_THREADS"),
        };
        c.output().unwrap().status.code()
    };
    assert_eq!(run(None, "2"), Some(0));
    assert_eq!(run(None, "0"), Some(2));
    assert_eq!(run(Some("2"), "0"), Some(0));
    assert_eq!(run(Some("0"), "2"), Some(2));
    assert_eq!(run(Some("many"), "2"), Some(2));
}

#[test]
fn repeated_runs_match_bytewise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({"experiment": "cotlar", "params": {"points": 16}}));
    let mut bodies = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let res = rtlab(&["cotlar", "--config", &cfg, "--seed", "5", "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(res.status.success());
        bodies.push(fs::read(out.join("cells.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn kernel_override_reaches_the_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = rtlab(&["verify-kernels", "--kernel", "poisson", "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["spec"]["params"]["kernel"], json!("poisson"));
    let bad = rtlab(&["verify-kernels", "--kernel", "sinc", "--out", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}
