//! Scenario configuration: a TOML document whose defaults reproduce the
//! reference operating point.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use secfmcw::channel::{RadarScene, TargetSpec};
use secfmcw::radar_rx::{CfarConfig, RangeGrid};
use secfmcw::waveform::BandPlan;

use crate::error::{SimError, SimResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub allocated_band_hz: f64,
    pub bw_min_hz: f64,
    pub bw_max_hz: f64,
    pub step_hz: f64,
    pub sample_rate_hz: f64,
    pub chirp_duration_s: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            allocated_band_hz: 80e6,
            bw_min_hz: 30e6,
            bw_max_hz: 50e6,
            step_hz: 1e6,
            sample_rate_hz: 100e6,
            chirp_duration_s: 20e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookConfig {
    /// PSK order `M`.
    pub order: u32,
    /// Chips per chirp `L`.
    pub code_len: usize,
    /// Designed codewords `G`.
    pub size: usize,
    /// Reference AFs `Z`.
    pub library_size: usize,
    pub epsilon: f64,
    pub max_sweeps: usize,
    /// Ghost lag of the first reference AF, in samples at the widest chirp.
    pub ghost_first_offset: usize,
    pub ghost_amplitude: f64,
    /// Amplitude of the second-harmonic ghost at twice the offset.
    pub harmonic_amplitude: f64,
    /// Pre-designed codebook to load instead of running the designer.
    pub path: Option<PathBuf>,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self {
            order: 256,
            code_len: 40,
            size: 64,
            library_size: 10,
            epsilon: 0.1,
            max_sweeps: 6,
            ghost_first_offset: 28,
            ghost_amplitude: 0.2,
            harmonic_amplitude: 0.05,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    /// Chirps per coherent processing interval `N_c`.
    pub n_chirps: usize,
    pub pri_s: f64,
    pub pilot_period: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            n_chirps: 64,
            pri_s: 1e-3,
            pilot_period: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub amplitude: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            range_m: 100.0,
            velocity_mps: 0.0,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub carrier_hz: f64,
    pub targets: Vec<TargetConfig>,
    /// Target whose errors are reported.
    pub focus_target: usize,
    /// Sensing SNR grid.
    pub snr_db: Vec<f64>,
    pub max_range_m: f64,
    pub oversample: usize,
    pub inverse_filter_eta: f64,
    pub pfa: f64,
    pub guard: [usize; 2],
    pub train: [usize; 2],
}

impl Default for SceneConfig {
    fn default() -> Self {
        let t = |r, v| TargetConfig {
            range_m: r,
            velocity_mps: v,
            amplitude: 1.0,
        };
        Self {
            carrier_hz: 2.4e9,
            targets: vec![t(45.0, 15.0), t(100.0, -25.0), t(160.0, 25.0)],
            focus_target: 1,
            snr_db: vec![0.0, 10.0, 20.0, 30.0],
            max_range_m: 300.0,
            oversample: 4,
            inverse_filter_eta: 0.02,
            pfa: 1e-6,
            guard: [2, 2],
            train: [8, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EveConfig {
    pub reference_snr_db: f64,
    pub reference_distance_m: f64,
}

impl Default for EveConfig {
    fn default() -> Self {
        Self {
            reference_snr_db: 20.0,
            reference_distance_m: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommConfig {
    pub snr_db: Vec<f64>,
    pub taps: usize,
    pub decay_db_per_tap: f64,
    pub xpd_db: f64,
    /// Data chirps per frame (the channel is redrawn per frame).
    pub frame_chirps: usize,
}

impl Default for CommConfig {
    fn default() -> Self {
        Self {
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            taps: 4,
            decay_db_per_tap: 3.0,
            xpd_db: 15.0,
            frame_chirps: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    /// Monte-Carlo trials per sensing point.
    pub rmse_trials: usize,
    /// Data chirps per link point for the legitimate user.
    pub ber_chirps: usize,
    /// Data chirps per link point for the eavesdropper.
    pub eve_ber_chirps: usize,
    /// Chirps averaged for sidelobe metrics.
    pub af_chirps: usize,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            rmse_trials: 200,
            ber_chirps: 10_000,
            eve_ber_chirps: 10_000,
            af_chirps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub export_maps: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
            export_maps: true,
        }
    }
}

/// Complete description of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub band: BandConfig,
    pub codebook: CodebookConfig,
    pub frame: FrameConfig,
    pub scene: SceneConfig,
    pub eve: EveConfig,
    pub comm: CommConfig,
    pub trials: TrialConfig,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            band: BandConfig::default(),
            codebook: CodebookConfig::default(),
            frame: FrameConfig::default(),
            scene: SceneConfig::default(),
            eve: EveConfig::default(),
            comm: CommConfig::default(),
            trials: TrialConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> SimResult<Self> {
        toml::from_str(text).map_err(|e| SimError::Parse {
            path: PathBuf::from("<string>"),
            msg: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> SimResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        toml::from_str(&text).map_err(|e| SimError::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serializes")
    }

    /// SHA-256 over the canonical JSON form; every field participates.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("configuration serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn band_plan(&self) -> secfmcw::Result<BandPlan> {
        let b = &self.band;
        BandPlan::new(b.allocated_band_hz, b.bw_min_hz, b.bw_max_hz, b.step_hz, b.sample_rate_hz)
    }

    pub fn num_samples(&self) -> usize {
        (self.band.chirp_duration_s * self.band.sample_rate_hz).round() as usize
    }

    pub fn scene_at(&self, snr_db: f64) -> RadarScene {
        RadarScene {
            targets: self
                .scene
                .targets
                .iter()
                .map(|t| TargetSpec {
                    range_m: t.range_m,
                    velocity_mps: t.velocity_mps,
                    rcs_amplitude: t.amplitude.into(),
                })
                .collect(),
            carrier_hz: self.scene.carrier_hz,
            snr_db,
            n_chirps: self.frame.n_chirps,
            pri_s: self.frame.pri_s,
        }
    }

    pub fn range_grid(&self) -> secfmcw::Result<RangeGrid> {
        RangeGrid::new(self.scene.max_range_m, self.band.sample_rate_hz, self.scene.oversample)
    }

    pub fn cfar(&self) -> CfarConfig {
        CfarConfig {
            pfa: self.scene.pfa,
            guard: (self.scene.guard[0], self.scene.guard[1]),
            train: (self.scene.train[0], self.scene.train[1]),
        }
    }

    /// Checks every precondition the modules will enforce, collecting all
    /// violations instead of stopping at the first.
    pub fn validate(&self) -> SimResult<()> {
        let mut v = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                v.push(msg.to_string());
            }
        };
        let band = self.band_plan();
        if let Err(e) = &band {
            check(false, &format!("band: {e}"));
        }
        let b = &self.band;
        check(b.chirp_duration_s > 0.0, "band.chirp_duration_s must be positive");
        let ns_exact = b.chirp_duration_s * b.sample_rate_hz;
        check(
            (ns_exact - ns_exact.round()).abs() < 1e-6 && ns_exact >= 2.0,
            "band.chirp_duration_s * band.sample_rate_hz must be an integer >= 2",
        );
        let ns = self.num_samples();
        let c = &self.codebook;
        check(c.order >= 2, "codebook.order must be at least 2");
        check(c.code_len >= 1, "codebook.code_len must be positive");
        check(
            c.code_len == 0 || ns.is_multiple_of(c.code_len),
            "codebook.code_len must divide the samples per chirp",
        );
        check(c.size >= 1, "codebook.size must be positive");
        check(c.library_size >= 1, "codebook.library_size must be positive");
        check(c.epsilon >= 0.0 && c.epsilon.is_finite(), "codebook.epsilon must be non-negative");
        check(
            c.ghost_amplitude > 0.0 && c.ghost_amplitude < 1.0,
            "codebook.ghost_amplitude must lie in (0, 1)",
        );
        check(
            (0.0..1.0).contains(&c.harmonic_amplitude),
            "codebook.harmonic_amplitude must lie in [0, 1)",
        );
        check(
            2 * (c.ghost_first_offset + c.library_size) + 2 < ns / 2,
            "codebook ghost offsets must stay inside half the chirp",
        );
        match secfmcw::codebook::admissible_phases_per_chip(c.order, c.epsilon) {
            Ok(a) => check(
                (a as f64).powi(c.code_len.min(64) as i32) >= c.size as f64,
                "codebook.size exceeds the admissible codebook bound",
            ),
            Err(e) => check(false, &format!("codebook.epsilon: {e}")),
        }
        let f = &self.frame;
        check(f.n_chirps >= 2, "frame.n_chirps must be at least 2");
        check(f.pri_s >= b.chirp_duration_s, "frame.pri_s must not be shorter than a chirp");
        check(f.pilot_period >= 1, "frame.pilot_period must be positive");
        let s = &self.scene;
        check(s.carrier_hz > 0.0, "scene.carrier_hz must be positive");
        check(!s.targets.is_empty(), "scene.targets must not be empty");
        check(s.focus_target < s.targets.len(), "scene.focus_target must index a target");
        for (i, t) in s.targets.iter().enumerate() {
            check(
                t.range_m > 0.0 && t.range_m <= s.max_range_m,
                &format!("scene.targets[{i}].range_m must lie in (0, max_range_m]"),
            );
        }
        check(s.snr_db.iter().all(|x| x.is_finite()), "scene.snr_db must be finite");
        check(s.oversample >= 1, "scene.oversample must be positive");
        check(s.inverse_filter_eta > 0.0, "scene.inverse_filter_eta must be positive");
        check(s.pfa > 0.0 && s.pfa < 1.0, "scene.pfa must lie in (0, 1)");
        check(
            2 * (s.guard[1] + s.train[1]) < f.n_chirps,
            "scene guard and training windows must fit the Doppler axis",
        );
        if let Ok(grid) = self.range_grid() {
            if let Err(e) = grid.check_fits(ns) {
                check(false, &format!("scene.max_range_m: {e}"));
            }
        } else {
            check(false, "scene.max_range_m must be positive");
        }
        check(self.eve.reference_snr_db.is_finite(), "eve.reference_snr_db must be finite");
        check(self.eve.reference_distance_m >= 0.0, "eve.reference_distance_m must be non-negative");
        let m = &self.comm;
        check(m.snr_db.iter().all(|x| x.is_finite()), "comm.snr_db must be finite");
        check(m.taps >= 1 && m.taps <= ns, "comm.taps must lie in [1, Ns]");
        check(m.frame_chirps >= 1, "comm.frame_chirps must be positive");
        check(self.trials.af_chirps >= 1, "trials.af_chirps must be positive");
        if v.is_empty() {
            Ok(())
        } else {
            Err(SimError::Validation(v))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let c = ScenarioConfig::default();
        let back = ScenarioConfig::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = ScenarioConfig::from_toml_str("seed = 7\n[codebook]\nsize = 8\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.codebook.size, 8);
        assert_eq!(c.codebook.code_len, 40);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            ScenarioConfig::from_toml_str("bogus = 1"),
            Err(SimError::Parse { .. })
        ));
    }

    #[test]
    fn all_violations_reported() {
        let mut c = ScenarioConfig::default();
        c.codebook.code_len = 33;
        c.scene.focus_target = 9;
        c.frame.n_chirps = 1;
        match c.validate() {
            Err(SimError::Validation(v)) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        b.trials.af_chirps += 1;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.output.dir = PathBuf::from("elsewhere");
        assert_ne!(a.hash(), c.hash());
    }
}
