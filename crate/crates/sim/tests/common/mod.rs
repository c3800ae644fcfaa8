#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use secfmcw_sim::design::{scenario_codebook, ScenarioCodebook};
use secfmcw_sim::ScenarioConfig;

/// Scratch directory unique to this test process and `name`.
pub fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("secfmcw-sim-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Reference parameters with a four-word codebook and small trial counts.
pub fn small_config() -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.codebook.size = 4;
    c.codebook.max_sweeps = 3;
    c.trials.rmse_trials = 3;
    c.trials.ber_chirps = 256;
    c.trials.eve_ber_chirps = 128;
    c.trials.af_chirps = 8;
    c.scene.snr_db = vec![10.0, 20.0, 30.0];
    c.comm.snr_db = vec![10.0];
    c
}

/// The small configuration's codebook, designed once per test binary.
pub fn small_codebook() -> &'static ScenarioCodebook {
    static CB: OnceLock<ScenarioCodebook> = OnceLock::new();
    CB.get_or_init(|| scenario_codebook(&small_config()).unwrap())
}

/// Small configuration pointing at a codebook file, so that each run skips
/// the designer.
pub fn small_config_with_file(name: &str) -> ScenarioConfig {
    let dir = scratch(name);
    let path = dir.join("codebook.txt");
    std::fs::write(&path, small_codebook().phase.to_text()).unwrap();
    let mut c = small_config();
    c.codebook.path = Some(path);
    c.output.dir = dir.join("out");
    c
}
