//! Experiments reproducing each evaluation figure as a result table.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;

use secfmcw::ambiguity::{range_af, sidelobe_metrics, mainlobe_bound, RangeAf};
use secfmcw::codebook::{bits_per_chirp, enumerate_im_indices, max_throughput, Scheme, ThroughputParams};
use secfmcw::radar_rx::ca_cfar;
use secfmcw::rng::SeedStream;
use secfmcw::waveform::{generate_chirp, PhaseCode};

use crate::comms::{simulate_link, LinkSetup};
use crate::config::ScenarioConfig;
use crate::design::{anchor_chirp, run_designer, scenario_codebook, ScenarioCodebook};
use crate::error::{SimError, SimResult};
use crate::sensing::{ghost_search, peak_summary, per_target_errors, run_trials, SensingSetup, Waveform};
use crate::table::{proportion_ci, Artifact, ResultTable, RowSink};

/// Selectable experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Closed-form throughput against chips per chirp.
    Fig7,
    /// Bit and block error rates against SNR.
    Fig8,
    /// Throughput and throughput gap against SNR.
    Fig9,
    /// Ghost peaks in the eavesdropper's range profile.
    Fig10,
    /// Sidelobe levels and throughput of a designed codebook.
    Fig11,
    /// Range-Doppler maps of both sensing receivers.
    Fig12,
    /// Range and velocity RMSE against SNR.
    Fig13,
    /// Ambiguity-function profiles and sidelobe metrics.
    Af,
    /// Plain-FMCW comparison of both sensing receivers.
    Baseline,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Fig7,
        Experiment::Fig8,
        Experiment::Fig9,
        Experiment::Fig10,
        Experiment::Fig11,
        Experiment::Fig12,
        Experiment::Fig13,
        Experiment::Af,
        Experiment::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig7 => "fig7",
            Experiment::Fig8 => "fig8",
            Experiment::Fig9 => "fig9",
            Experiment::Fig10 => "fig10",
            Experiment::Fig11 => "fig11",
            Experiment::Fig12 => "fig12",
            Experiment::Fig13 => "fig13",
            Experiment::Af => "af",
            Experiment::Baseline => "baseline",
        }
    }

    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|e| e.name().to_string()).collect()
    }
}

impl FromStr for Experiment {
    type Err = SimError;

    fn from_str(s: &str) -> SimResult<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| SimError::UnknownExperiment {
                name: s.to_string(),
                valid: Self::names(),
            })
    }
}

/// Table plus auxiliary exports of one run.
#[derive(Debug, Clone, Default)]
pub struct ScenarioOutput {
    pub table: ResultTable,
    pub artifacts: Vec<Artifact>,
}

/// A validated configuration with its lazily designed codebook.
pub struct Scenario {
    cfg: ScenarioConfig,
    hash: String,
    codebook: OnceLock<ScenarioCodebook>,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> SimResult<Self> {
        cfg.validate()?;
        let hash = cfg.hash();
        Ok(Self {
            cfg,
            hash,
            codebook: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// The scenario's codebook, designed on first use.
    pub fn codebook(&self) -> SimResult<&ScenarioCodebook> {
        if let Some(cb) = self.codebook.get() {
            return Ok(cb);
        }
        let cb = scenario_codebook(&self.cfg)?;
        Ok(self.codebook.get_or_init(|| cb))
    }

    /// Installs an externally designed codebook (it must match the
    /// configuration).
    pub fn with_codebook(self, cb: ScenarioCodebook) -> Self {
        let _ = self.codebook.set(cb);
        self
    }

    pub fn run(&self, experiment: Experiment) -> SimResult<ScenarioOutput> {
        match experiment {
            Experiment::Fig7 => self.fig7(),
            Experiment::Fig8 | Experiment::Fig9 => self.link(experiment),
            Experiment::Fig10 => self.fig10(),
            Experiment::Fig11 => self.fig11(),
            Experiment::Fig12 => self.fig12(),
            Experiment::Fig13 => self.fig13(),
            Experiment::Af => self.af(),
            Experiment::Baseline => self.baseline(),
        }
    }

    fn sink(&self, e: Experiment) -> RowSink {
        RowSink::new(e.name(), &self.hash)
    }

    fn throughput_params(&self, code_len: usize) -> SimResult<ThroughputParams> {
        let c = &self.cfg.codebook;
        Ok(ThroughputParams {
            im_size: enumerate_im_indices(&self.cfg.band_plan()?)?.len() as u64,
            library_size: c.library_size as u64,
            order: c.order,
            code_len,
            epsilon: c.epsilon,
            chirp_duration_s: self.cfg.band.chirp_duration_s,
        })
    }

    fn fig7(&self) -> SimResult<ScenarioOutput> {
        let mut s = self.sink(Experiment::Fig7);
        for l in (10..=60).step_by(10) {
            let p = self.throughput_params(l)?;
            s.push("code_len", l as f64, "throughput_im_pc_bps", max_throughput(Scheme::ImPcFmcw, &p)?, 1, 0.0);
            s.push("code_len", l as f64, "throughput_sec_bps", max_throughput(Scheme::SecFmcw, &p)?, 1, 0.0);
        }
        Ok(ScenarioOutput {
            table: s.table,
            artifacts: Vec::new(),
        })
    }

    fn link(&self, e: Experiment) -> SimResult<ScenarioOutput> {
        let cb = self.codebook()?;
        let setup = LinkSetup::new(&self.cfg, &cb.combined)?;
        let t = self.cfg.band.chirp_duration_s;
        let bits = setup.bits_per_block() as f64;
        let nominal_bits = bits_per_chirp(Scheme::SecFmcw, &self.throughput_params(self.cfg.codebook.code_len)?)? as f64;
        let mut s = self.sink(e);
        for &snr in &self.cfg.comm.snr_db {
            let c = simulate_link(&setup, snr, self.cfg.trials.ber_chirps, self.cfg.trials.eve_ber_chirps)?;
            let (u, v) = (c.user, c.eve);
            match e {
                Experiment::Fig8 => {
                    s.push("snr_db", snr, "ber_cu", u.ber(), u.bits, proportion_ci(u.ber(), u.bits));
                    s.push("snr_db", snr, "per_cu", u.per(), u.blocks, proportion_ci(u.per(), u.blocks));
                    s.push("snr_db", snr, "im_ser_cu", u.im_ser(), u.im_symbols, proportion_ci(u.im_ser(), u.im_symbols));
                    s.push("snr_db", snr, "ber_eve", v.ber(), v.bits, proportion_ci(v.ber(), v.bits));
                    s.push("snr_db", snr, "per_eve", v.per(), v.blocks, proportion_ci(v.per(), v.blocks));
                }
                _ => {
                    let m = secfmcw::comms_rx::link_metrics(&u, &v, bits, t);
                    let nominal = secfmcw::comms_rx::link_metrics(&u, &v, nominal_bits, t);
                    s.push("snr_db", snr, "throughput_cu_bps", m.throughput_bps, u.blocks, 0.0);
                    s.push("snr_db", snr, "throughput_eve_bps", (1.0 - v.per()) * bits / t, v.blocks, 0.0);
                    s.push("snr_db", snr, "gap_bps", m.gap_bps, u.blocks, 0.0);
                    s.push("snr_db", snr, "gap_nominal_bps", nominal.gap_bps, u.blocks, 0.0);
                    s.push("snr_db", snr, "ceiling_nominal_bps", nominal_bits / t, 1, 0.0);
                }
            }
        }
        Ok(ScenarioOutput {
            table: s.table,
            artifacts: Vec::new(),
        })
    }

    fn fig10(&self) -> SimResult<ScenarioOutput> {
        let cb = self.codebook()?;
        let setup = SensingSetup::new(&self.cfg, Some(cb))?;
        let mut s = self.sink(Experiment::Fig10);
        let mut artifacts = Vec::new();
        for (k, &snr) in self.cfg.scene.snr_db.iter().enumerate() {
            let seed = SeedStream::new(self.cfg.seed).child("ghosts", k as u64).seed();
            let r = ghost_search(&setup, snr, seed, 2.0)?;
            let n = r.chirps as u64;
            s.push("snr_db", snr, "ghost_hit_rate", r.ghost_rate(), n, proportion_ci(r.ghost_rate(), n));
            s.push("snr_db", snr, "target_hit_rate", r.target_rate(), n, proportion_ci(r.target_rate(), n));
        }
        if self.cfg.output.export_maps {
            artifacts.push(self.eve_profiles(&setup)?);
        }
        Ok(ScenarioOutput {
            table: s.table,
            artifacts,
        })
    }

    /// Mean matched-filter magnitude of the eavesdropper per range cell for
    /// plain and secure frames.
    fn eve_profiles(&self, setup: &SensingSetup<'_>) -> SimResult<Artifact> {
        let snr = self.cfg.scene.snr_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scene = self.cfg.scene_at(snr);
        let mut cols = Vec::new();
        for w in [Waveform::Plain, Waveform::Secure] {
            let seed = SeedStream::new(self.cfg.seed).child("profile", 0).seed();
            let (frame, _) = setup.frame(w, seed)?;
            let obs = setup.eve_observation(&frame, &scene, seed)?;
            let z = setup.eve.compress(&obs)?;
            let grid = &setup.grid;
            let mut mean = vec![0.0; grid.len()];
            for zi in &z {
                let r = secfmcw::radar_rx::range_response(zi, grid);
                for (m, v) in r.iter().enumerate() {
                    mean[m] += v.norm() / z.len() as f64;
                }
            }
            let peak = mean.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            cols.push(mean.into_iter().map(|v| 20.0 * (v / peak).max(1e-12).log10()).collect::<Vec<_>>());
        }
        let mut out = String::from("range_m,plain_db,sec_db\n");
        for m in 0..setup.grid.len() {
            let _ = writeln!(out, "{},{:.4},{:.4}", setup.grid.range(m), cols[0][m], cols[1][m]);
        }
        Ok(Artifact {
            name: "fig10_eve_range_profile.csv".into(),
            contents: out,
        })
    }

    fn fig11(&self) -> SimResult<ScenarioOutput> {
        let l = self.cfg.codebook.code_len;
        let (outcome, _) = run_designer(&self.cfg, l, self.cfg.codebook.size)?;
        let anchor = anchor_chirp(&self.cfg, l)?;
        let nominal = range_af(&generate_chirp(&anchor)?.samples);
        let k_t = mainlobe_bound(&nominal.normalized());
        let n = self.cfg.trials.af_chirps;
        let mut rng = SeedStream::new(self.cfg.seed).rng_for("fig11", l as u64);
        let rows = &outcome.codebook.rows;
        let mut sec = Vec::with_capacity(n);
        let mut rnd = Vec::with_capacity(n);
        for _ in 0..n {
            let g = rng.random_range(0..rows.len());
            sec.push(range_af(&generate_chirp(&anchor.with_code(rows[g].clone())?)?.samples));
            let code = PhaseCode::random(l, self.cfg.codebook.order, &mut rng);
            rnd.push(range_af(&generate_chirp(&anchor.with_code(code)?)?.samples));
        }
        let ms = sidelobe_metrics(&sec, k_t)?;
        let mr = sidelobe_metrics(&rnd, k_t)?;
        let p = self.throughput_params(l)?;
        let mut s = self.sink(Experiment::Fig11);
        let x = l as f64;
        s.push("code_len", x, "isl_sec", ms.isl, n as u64, 0.0);
        s.push("code_len", x, "psl_sec", ms.psl, n as u64, 0.0);
        s.push("code_len", x, "isl_random", mr.isl, n as u64, 0.0);
        s.push("code_len", x, "psl_random", mr.psl, n as u64, 0.0);
        s.push("code_len", x, "throughput_sec_bps", max_throughput(Scheme::SecFmcw, &p)?, 1, 0.0);
        s.push("code_len", x, "infeasible_codewords", outcome.infeasible.len() as f64, rows.len() as u64, 0.0);
        let worst = outcome.codebook.mismatch.iter().copied().fold(0.0, f64::max);
        s.push("code_len", x, "max_mismatch", worst, rows.len() as u64, 0.0);
        Ok(ScenarioOutput {
            table: s.table,
            artifacts: Vec::new(),
        })
    }

    fn fig12(&self) -> SimResult<ScenarioOutput> {
        let cb = self.codebook()?;
        let setup = SensingSetup::new(&self.cfg, Some(cb))?;
        let mut s = self.sink(Experiment::Fig12);
        let mut artifacts = Vec::new();
        for &snr in &self.cfg.scene.snr_db {
            let root = SeedStream::new(self.cfg.seed).child("fig12", 0);
            let (frame, _) = setup.frame(Waveform::Secure, root.child("frame", 0).seed())?;
            let scene = self.cfg.scene_at(snr);
            let (legit, eve) = setup.maps(&frame, &scene, root.child("trial", 0).seed())?;
            for (who, map) in [("legit", &legit), ("eve", &eve)] {
                let dets = ca_cfar(map, &setup.cfar)?;
                let errs = per_target_errors(&dets, &scene, &setup.caps);
                let rbin = setup.grid.spacing_m();
                let vbin = map.velocity(1.0) - map.velocity(0.0);
                let resolved = errs.iter().filter(|e| e.0 <= rbin && e.1 <= vbin.abs()).count();
                s.push("snr_db", snr, &format!("{who}_targets_resolved"), resolved as f64, 1, 0.0);
                s.push("snr_db", snr, &format!("{who}_detections"), dets.len() as f64, 1, 0.0);
                if self.cfg.output.export_maps {
                    artifacts.push(Artifact {
                        name: format!("fig12_rd_{who}_snr{snr}.csv"),
                        contents: map.to_csv(),
                    });
                }
            }
        }
        Ok(ScenarioOutput { table: s.table, artifacts })
    }

    fn fig13(&self) -> SimResult<ScenarioOutput> {
        let cb = self.codebook()?;
        let setup = SensingSetup::new(&self.cfg, Some(cb))?;
        let trials = self.cfg.trials.rmse_trials;
        let mut s = self.sink(Experiment::Fig13);
        for &snr in &self.cfg.scene.snr_db {
            for w in [Waveform::Plain, Waveform::Secure] {
                let st = run_trials(&setup, w, snr, trials)?;
                for (who, acc) in [("legit", &st.legit), ("eve", &st.eve)] {
                    let r = acc.rmse();
                    let tag = w.tag();
                    s.push("snr_db", snr, &format!("{who}_{tag}_range_rmse_m"), r.range_m, r.trials as u64, 0.0);
                    s.push("snr_db", snr, &format!("{who}_{tag}_velocity_rmse_mps"), r.velocity_mps, r.trials as u64, 0.0);
                }
            }
        }
        Ok(ScenarioOutput {
            table: s.table,
            artifacts: Vec::new(),
        })
    }

    fn af(&self) -> SimResult<ScenarioOutput> {
        let cb = self.codebook()?;
        let l = self.cfg.codebook.code_len;
        let anchor = anchor_chirp(&self.cfg, l)?;
        let nominal = range_af(&generate_chirp(&anchor)?.samples);
        let k_t = mainlobe_bound(&nominal.normalized());
        let afs: Vec<RangeAf> = cb
            .phase
            .rows
            .iter()
            .map(|c| Ok(range_af(&generate_chirp(&anchor.with_code(c.clone())?)?.samples)))
            .collect::<SimResult<_>>()?;
        let mut rng = SeedStream::new(self.cfg.seed).rng_for("af-random", 0);
        let random: Vec<RangeAf> = (0..afs.len())
            .map(|_| {
                let code = PhaseCode::random(l, self.cfg.codebook.order, &mut rng);
                Ok(range_af(&generate_chirp(&anchor.with_code(code)?)?.samples))
            })
            .collect::<SimResult<_>>()?;
        let mut s = self.sink(Experiment::Af);
        let g = afs.len() as u64;
        for (name, set) in [("sec", &afs), ("random", &random)] {
            let m = sidelobe_metrics(set, k_t)?;
            s.push("code_len", l as f64, &format!("isl_{name}"), m.isl, g, 0.0);
            s.push("code_len", l as f64, &format!("psl_{name}"), m.psl, g, 0.0);
        }
        let nm = sidelobe_metrics(std::slice::from_ref(&nominal), k_t)?;
        s.push("code_len", l as f64, "isl_nominal", nm.isl, 1, 0.0);
        s.push("code_len", l as f64, "psl_nominal", nm.psl, 1, 0.0);
        s.push("code_len", l as f64, "max_mismatch", cb.phase.mismatch.iter().copied().fold(0.0, f64::max), g, 0.0);
        let artifacts = if self.cfg.output.export_maps {
            af_artifacts(cb, &nominal, &afs)
        } else {
            Vec::new()
        };
        Ok(ScenarioOutput { table: s.table, artifacts })
    }

    fn baseline(&self) -> SimResult<ScenarioOutput> {
        let setup = SensingSetup::new(&self.cfg, None)?;
        let trials = self.cfg.trials.rmse_trials;
        let mut s = self.sink(Experiment::Baseline);
        for &snr in &self.cfg.scene.snr_db {
            let st = run_trials(&setup, Waveform::Plain, snr, trials)?;
            let root = SeedStream::new(self.cfg.seed).child("baseline", 0);
            let (frame, _) = setup.frame(Waveform::Plain, root.child("frame", 0).seed())?;
            let (legit, eve) = setup.maps(&frame, &self.cfg.scene_at(snr), root.child("trial", 0).seed())?;
            for (who, acc, map) in [("legit", &st.legit, &legit), ("eve", &st.eve, &eve)] {
                let r = acc.rmse();
                let p = peak_summary(map);
                let n = r.trials as u64;
                s.push("snr_db", snr, &format!("{who}_range_rmse_m"), r.range_m, n, 0.0);
                s.push("snr_db", snr, &format!("{who}_velocity_rmse_mps"), r.velocity_mps, n, 0.0);
                s.push("snr_db", snr, &format!("{who}_peak_range_m"), p.range_m, 1, 0.0);
                s.push("snr_db", snr, &format!("{who}_peak_velocity_mps"), p.velocity_mps, 1, 0.0);
                s.push("snr_db", snr, &format!("{who}_peak_to_median_db"), p.peak_to_median_db, 1, 0.0);
            }
        }
        Ok(ScenarioOutput {
            table: s.table,
            artifacts: Vec::new(),
        })
    }
}

/// CSV exports of the nominal AF, the library templates and the designed
/// codeword AFs.
pub fn af_artifacts(cb: &ScenarioCodebook, nominal: &RangeAf, afs: &[RangeAf]) -> Vec<Artifact> {
    let nom = nominal.normalized();
    let mut profile = String::from("bin,nominal");
    for g in 0..afs.len() {
        let _ = write!(profile, ",codeword_{g}");
    }
    profile.push('\n');
    let normed: Vec<RangeAf> = afs.iter().map(RangeAf::normalized).collect();
    for k in 0..nom.len() / 2 {
        let _ = write!(profile, "{k},{:.6e}", nom.values()[k]);
        for a in &normed {
            let _ = write!(profile, ",{:.6e}", a.values()[k]);
        }
        profile.push('\n');
    }
    vec![
        Artifact {
            name: "af_profiles.csv".into(),
            contents: profile,
        },
        Artifact {
            name: "af_library.csv".into(),
            contents: cb.library.to_csv(),
        },
        Artifact {
            name: "codebook.txt".into(),
            contents: cb.phase.to_text(),
        },
    ]
}

/// Runs one experiment for a configuration on a pool of `workers` threads.
pub fn run_scenario(cfg: &ScenarioConfig, experiment: Experiment, workers: usize) -> SimResult<ScenarioOutput> {
    let scenario = Scenario::new(cfg.clone())?;
    with_workers(workers, || scenario.run(experiment))
}

/// Runs `f` on a dedicated pool; `0` uses the global pool.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
