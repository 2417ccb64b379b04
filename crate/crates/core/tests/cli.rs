use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use scfloer::config::ExperimentConfig;

fn scfloer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scfloer")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, cfg.to_toml()).unwrap();
    p.display().to_string()
}

fn linear_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.model.id = scfloer::config::ModelId::Linear;
    cfg.model.a = 1.0;
    cfg.grid.n_t = 4;
    cfg.run.levels = vec![0, 1];
    cfg
}

#[test]
fn glue_identities_on_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = scfloer(&["glue-identities", "--out", out.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("PASS criterion  1"), "{text}");
    assert!(text.contains("max composition error"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("glue-identities_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    let mut effective = ExperimentConfig::default();
    effective.output.dir = out.display().to_string();
    assert_eq!(summary["config_hash"], effective.hash());
    assert!(summary["margin_audit"].as_array().unwrap().iter().all(|a| a["ok"] == true));
    let back = ExperimentConfig::from_toml(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(back.run.seed, ExperimentConfig::default().run.seed);
}

#[test]
fn even_grid_is_rejected_before_any_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.output.dir = dir.path().join("out").display().to_string();
    let text = cfg.to_toml().replace("n_s = 481", "n_s = 480");
    let p = dir.path().join("bad.toml");
    fs::write(&p, text).unwrap();
    let o = scfloer(&["full-report", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.n_s"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_and_missing_file_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "[grid]\ncolour = 3\n").unwrap();
    assert_eq!(scfloer(&["scales-check", "--config", p.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(scfloer(&["scales-check", "--config", dir.path().join("none.toml").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(scfloer(&["scales-check", "--jobs", "0"]).status.code(), Some(2));
}

#[test]
fn index_sweep_of_linear_model_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = linear_config();
    let c = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    let o = scfloer(&["index-sweep", "--config", &c, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let mut r = csv::Reader::from_path(out.join("index-sweep_index.csv")).unwrap();
    let col = r.headers().unwrap().iter().position(|h| h == "index").unwrap();
    let rows: Vec<_> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 2 * 3);
    assert!(rows.iter().all(|x| &x[col] == "0"));
}

#[test]
fn identical_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), &linear_config());
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = scfloer(&["glue-identities", "--config", &c, "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        fs::read(out.join("glue-identities_identities.csv")).unwrap()
    };
    assert_eq!(run("a", "3"), run("b", "3"));
    assert_ne!(run("a", "3"), run("c", "4"));
}

#[test]
fn failing_suite_uses_its_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = linear_config();
    cfg.tol.identity = 1e-30;
    let c = write_config(dir.path(), &cfg);
    let out = dir.path().join("out");
    let o = scfloer(&["glue-identities", "--config", &c, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL criterion  1"));
}
