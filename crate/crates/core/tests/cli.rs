use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qdemon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdemon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SWEEP: &str = r#"{
    "protocol": "B",
    "n_shots": 3000,
    "bootstrap_resamples": 100,
    "master_seed": 42,
    "sweep": {"axis": "eps_fb", "grid": [0.0, 0.2, 0.5]}
}"#;

fn csv_body(text: &str) -> String {
    text.lines().skip(1).collect::<Vec<_>>().join("\n")
}

#[test]
fn sweep_writes_table_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SWEEP);
    let out = tmp.path().join("run");
    let o = qdemon(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let header = table.lines().next().unwrap();
    assert!(header.starts_with("param,avg_exp_bWmIsh,avg_exp_bWmIqc,avg_exp_bW,mean_Iqc,mean_Ish,mean_bW,lambda_fb,eta,"));
    assert!(header.contains("oracle_avg_exp_bWmIqc"));
    assert_eq!(table.lines().count(), 4);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 42);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest["points"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_is_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SWEEP);
    let mut bodies = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("t{threads}"));
        let o = qdemon(&["sweep", "--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        bodies.push(csv_body(&fs::read_to_string(out.join("sweep.csv")).unwrap()));
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn seed_flag_changes_results() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SWEEP);
    let run = |seed: &str| {
        let out = tmp.path().join(format!("s{seed}"));
        assert!(qdemon(&["sweep", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()])
            .status
            .success());
        fs::read_to_string(out.join("sweep.csv")).unwrap()
    };
    assert_ne!(run("1"), run("2"));
}

#[test]
fn manifest_reproduces_a_row_with_single() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SWEEP);
    let out = tmp.path().join("run");
    assert!(qdemon(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()])
        .status
        .success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let point = &manifest["points"][1];
    let seed = point["seed"].as_u64().unwrap().to_string();
    let param = point["param"].as_f64().unwrap().to_string();

    let single_out = tmp.path().join("single");
    let o = qdemon(&[
        "single",
        "--config",
        &cfg,
        "--seed",
        &seed,
        "--param",
        &param,
        "--out",
        single_out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let row: Vec<f64> = table.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(summary["summary"]["avg_exp_sigma_iqc"].as_f64().unwrap(), row[2]);
    assert_eq!(summary["summary"]["mean_betaW"].as_f64().unwrap(), row[6]);
    assert!(single_out.join("summary.json").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        r#"{"sweep": {"axis": "beta_eps", "grid": []}}"#,
        r#"{"n_shotz": 100}"#,
        r#"{"protocol": "C"}"#,
        "not json",
    ];
    for body in cases {
        let cfg = write_config(tmp.path(), body);
        let o = qdemon(&["sweep", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    }
    let missing = tmp.path().join("absent.json");
    assert_eq!(qdemon(&["sweep", "--config", missing.to_str().unwrap()]).status.code(), Some(2));

    let no_sweep = write_config(tmp.path(), "{}");
    assert_eq!(qdemon(&["sweep", "--config", &no_sweep]).status.code(), Some(2));

    let tiny = write_config(tmp.path(), r#"{"n_shots": 20}"#);
    assert_eq!(qdemon(&["single", "--config", &tiny]).status.code(), Some(2));
}

#[test]
fn validate_defaults_pass() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"n_shots": 20000, "bootstrap_resamples": 200}"#);
    let out = tmp.path().join("v");
    let o = qdemon(&["validate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("all checks passed"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("validation.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn validate_names_injected_fault() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"n_shots": 5000, "bootstrap_resamples": 50, "inject_fault": "skip_jump_normalization"}"#,
    );
    let o = qdemon(&["validate", "--config", &cfg, "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let norm = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "norm_preservation")
        .unwrap();
    assert_eq!(norm["status"], "fail");
}

#[test]
fn validate_skips_relaxation_checks_without_t1() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"n_shots": 5000, "bootstrap_resamples": 100, "physics": {"t1_us": null}}"#,
    );
    let o = qdemon(&["validate", "--config", &cfg]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("SKIP  free_decay"));
    assert!(text.contains("SKIP  dt_convergence"));
}

#[test]
fn single_writes_records_on_request() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"n_shots": 500, "bootstrap_resamples": 20, "output": {"write_records": true}}"#,
    );
    let out = tmp.path().join("s");
    let o = qdemon(&["single", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert!(records.starts_with("shot,x,k,y,z,work_hw,n_jumps\n"));
    assert_eq!(records.lines().count(), 501);
}

#[test]
fn schema_is_json() {
    let o = qdemon(&["schema"]);
    assert!(o.status.success());
    let schema: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let props = schema["properties"].as_object().unwrap();
    for key in ["protocol", "physics", "timeline", "sweep", "n_shots", "master_seed", "oracle_mode"] {
        assert!(props.contains_key(key), "{key}");
    }
}
