mod common;

use std::path::Path;
use std::process::{Command, Output};

use secfmcw_sim::{ResultTable, ScenarioConfig};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_secfmcw-sim")).args(args).output().unwrap()
}

fn stdout_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
}

fn write_config(dir: &Path, cfg: &ScenarioConfig) -> String {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, cfg.to_toml()).unwrap();
    p.display().to_string()
}

#[test]
fn default_config_parses_back() {
    let o = sim(&["default-config"]);
    assert!(o.status.success());
    let cfg = ScenarioConfig::from_toml_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg, ScenarioConfig::default());
}

#[test]
fn validate_config_reports_hash() {
    let o = sim(&["validate-config"]);
    assert!(o.status.success());
    let j = stdout_json(&o);
    assert_eq!(j["status"], "ok");
    assert_eq!(j["config_hash"], ScenarioConfig::default().hash());
}

#[test]
fn invalid_config_exits_with_validation_json() {
    let dir = common::scratch("cli-invalid");
    let p = dir.join("bad.toml");
    std::fs::write(&p, "[codebook]\ncode_len = 33\n[frame]\nn_chirps = 1\n").unwrap();
    let o = sim(&["--config", p.to_str().unwrap(), "validate-config"]);
    assert_eq!(o.status.code(), Some(2));
    let j = stdout_json(&o);
    assert_eq!(j["error"], "validation");
    assert!(j["details"]["violations"].as_array().unwrap().len() >= 2);

    std::fs::write(&p, "[codebook\n").unwrap();
    let o = sim(&["--config", p.to_str().unwrap(), "run", "fig7"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout_json(&o)["error"], "parse");

    let o = sim(&["--config", dir.join("missing.toml").to_str().unwrap(), "run", "fig7"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout_json(&o)["error"], "io");
}

#[test]
fn unknown_experiment_and_variable() {
    let o = sim(&["run", "fig99"]);
    assert!(!o.status.success());
    let j = stdout_json(&o);
    assert_eq!(j["error"], "unknown_experiment");
    assert!(j["details"]["valid_experiments"].as_array().unwrap().iter().any(|v| v == "fig13"));

    let dir = common::scratch("cli-var");
    let o = sim(&["--out", dir.to_str().unwrap(), "sweep", "fig7", "--var", "codebook.nope", "--values", "1"]);
    assert!(!o.status.success());
    let j = stdout_json(&o);
    assert_eq!(j["error"], "unknown_variable");
    assert!(j["details"]["valid_paths"].as_array().unwrap().iter().any(|v| v == "codebook.code_len"));
}

#[test]
fn fig7_writes_table_and_sidecar() {
    let dir = common::scratch("cli-fig7");
    let o = sim(&["--out", dir.to_str().unwrap(), "--seed", "5", "run", "fig7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let j = stdout_json(&o);
    assert_eq!(j["status"], "ok");
    let table = ResultTable::from_csv(&std::fs::read_to_string(dir.join("fig7.csv")).unwrap()).unwrap();
    assert_eq!(table.len(), 12);
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("fig7.json")).unwrap()).unwrap();
    let mut cfg = ScenarioConfig::default();
    cfg.seed = 5;
    cfg.output.dir = dir.clone();
    assert_eq!(side["config_hash"], cfg.hash());
    assert_eq!(side["seed"], 5);
    assert!(table.rows.iter().all(|r| r.config_hash == cfg.hash()));
}

#[test]
fn empty_sweep_succeeds_with_empty_table() {
    let dir = common::scratch("cli-empty");
    let o = sim(&["--out", dir.to_str().unwrap(), "sweep", "fig7", "--var", "codebook.code_len", "--values="]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(dir.join("sweep_fig7_codebook_code_len.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    let o = sim(&["--out", dir.to_str().unwrap(), "sweep", "fig7", "--var", "codebook.code_len", "--values"]);
    assert!(o.status.success());
}

#[test]
fn usage_errors_are_json() {
    let o = sim(&["run"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout_json(&o)["error"], "usage");
    let o = sim(&["sweep", "fig7", "--var", "seed", "--values", "1,x"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout_json(&o)["error"], "validation");
}

#[test]
fn runs_are_byte_reproducible() {
    let cfg = common::small_config_with_file("cli-repeat");
    let dir = cfg.output.dir.parent().unwrap().to_path_buf();
    let path = write_config(&dir, &cfg);
    let mut outputs = Vec::new();
    for workers in ["1", "2"] {
        let o = sim(&["--config", &path, "--workers", workers, "run", "fig13"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
        outputs.push(std::fs::read_to_string(cfg.output.dir.join("fig13.csv")).unwrap());
    }
    assert!(outputs[0] == outputs[1], "fig13 tables differ between runs");
    // three SNR points, two receivers, two waveforms, two metrics
    assert_eq!(outputs[0].lines().count(), 1 + 3 * 2 * 2 * 2);
}

#[test]
fn design_and_export_commands() {
    let mut cfg = common::small_config();
    let dir = common::scratch("cli-design");
    cfg.output.dir = dir.join("out");
    let path = write_config(&dir, &cfg);
    let o = sim(&["--config", &path, "design-codebook"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let j = stdout_json(&o);
    assert_eq!(j["summary"]["codewords"], 4);
    assert!(j["summary"]["max_mismatch"].as_f64().unwrap() <= 0.1);
    let text = std::fs::read_to_string(cfg.output.dir.join("codebook.txt")).unwrap();
    assert_eq!(text, common::small_codebook().phase.to_text());

    let o = sim(&["--config", &path, "export-af"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    for f in ["af.csv", "af_profiles.csv", "af_library.csv"] {
        assert!(cfg.output.dir.join(f).exists(), "{f} missing");
    }
}
