//! Monte-Carlo sensing trials for the legitimate receiver and the sensing
//! eavesdropper.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use secfmcw::channel::{eve_echo, eve_reference, radar_echo, EveReferenceLink, HopReference, RadarScene, TargetSpec};
use secfmcw::eve_rx::{EveObservation, EveReceiver};
use secfmcw::radar_rx::{
    ca_cfar, ca_cfar_1d, target_errors, CfarConfig, Detection, ErrorAccumulator, ErrorCaps, LegitimateReceiver,
    RangeDopplerMap, RangeGrid,
};
use secfmcw::rng::SeedStream;
use secfmcw::waveform::{sensing_frame, BandPlan, ChirpParams, Frame, PhaseCode};

use crate::config::ScenarioConfig;
use crate::design::ScenarioCodebook;
use crate::error::SimResult;

/// Transmitted signal family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Waveform {
    /// Constant-parameter uncoded FMCW.
    Plain,
    /// Random entries of the secure combined codebook.
    Secure,
}

impl Waveform {
    pub fn tag(self) -> &'static str {
        match self {
            Waveform::Plain => "plain",
            Waveform::Secure => "sec",
        }
    }
}

/// Everything a sensing trial needs, built once per scenario.
pub struct SensingSetup<'a> {
    pub cfg: &'a ScenarioConfig,
    pub band: BandPlan,
    pub grid: RangeGrid,
    pub cfar: CfarConfig,
    pub caps: ErrorCaps,
    pub hop: HopReference,
    pub legit: LegitimateReceiver,
    pub eve: EveReceiver,
    pub codebook: Option<&'a ScenarioCodebook>,
}

impl<'a> SensingSetup<'a> {
    pub fn new(cfg: &'a ScenarioConfig, codebook: Option<&'a ScenarioCodebook>) -> SimResult<Self> {
        let band = cfg.band_plan()?;
        let grid = cfg.range_grid()?;
        let hop = HopReference::for_band(&band);
        let mut legit = LegitimateReceiver::new(grid.clone(), hop);
        legit.eta = cfg.scene.inverse_filter_eta;
        Ok(Self {
            cfg,
            band,
            eve: EveReceiver::new(grid.clone()),
            grid,
            cfar: cfg.cfar(),
            caps: ErrorCaps::default(),
            hop,
            legit,
            codebook,
        })
    }

    fn plain_chirp(&self) -> SimResult<ChirpParams> {
        Ok(self.band.chirp(
            0.0,
            self.cfg.band.bw_max_hz,
            PhaseCode::zeros(self.cfg.codebook.code_len, self.cfg.codebook.order),
            self.cfg.band.chirp_duration_s,
        )?)
    }

    /// Transmit frame and the codebook entry of each chirp (`None` for
    /// plain FMCW).
    pub fn frame(&self, waveform: Waveform, seed: u64) -> SimResult<(Frame, Vec<Option<u64>>)> {
        let n = self.cfg.frame.n_chirps;
        let (params, entries) = match (waveform, self.codebook) {
            (Waveform::Secure, Some(cb)) => {
                let mut rng = SeedStream::new(seed).rng_for("sensing-entries", 0);
                let size = cb.combined.size();
                let entries: Vec<u64> = (0..n).map(|_| rng.random_range(0..size)).collect();
                let params = entries
                    .iter()
                    .map(|&e| cb.combined.chirp(e, &self.band, self.cfg.band.chirp_duration_s))
                    .collect::<secfmcw::Result<Vec<_>>>()?;
                (params, entries.into_iter().map(Some).collect())
            }
            _ => (vec![self.plain_chirp()?; n], vec![None; n]),
        };
        Ok((sensing_frame(&params, self.cfg.frame.pri_s)?, entries))
    }

    fn eve_link(&self) -> EveReferenceLink {
        EveReferenceLink {
            distance_m: self.cfg.eve.reference_distance_m,
            snr_db: Some(self.cfg.eve.reference_snr_db),
            carrier_hz: self.cfg.scene.carrier_hz,
        }
    }

    /// Legitimate and eavesdropper range-Doppler maps of one trial.
    pub fn maps(&self, frame: &Frame, scene: &RadarScene, seed: u64) -> SimResult<(RangeDopplerMap, RangeDopplerMap)> {
        let s = SeedStream::new(seed);
        let echoes = radar_echo(frame, scene, &self.hop, s.child("noise", 0).seed())?;
        let (legit, _) = self
            .legit
            .process(&echoes, &frame.chirps_v, scene.pri_s, scene.wavelength())?;
        let obs = self.eve_observation(frame, scene, seed)?;
        let (eve, _) = self.eve.process(&obs, scene.pri_s, scene.wavelength())?;
        Ok((legit, eve))
    }

    pub fn eve_observation(&self, frame: &Frame, scene: &RadarScene, seed: u64) -> SimResult<EveObservation> {
        let s = SeedStream::new(seed);
        let reference = eve_reference(frame, scene.n_chirps, &self.eve_link(), &self.hop, s.child("eve", 0).seed())?;
        let echoes = eve_echo(frame, scene, &self.hop, s.child("eve", 1).seed())?;
        Ok(EveObservation::new(
            reference,
            echoes,
            self.cfg.eve.reference_snr_db,
            scene.snr_db,
        )?)
    }

    /// Focus-target errors of the legitimate receiver and the eavesdropper
    /// for one trial.
    pub fn trial(&self, waveform: Waveform, snr_db: f64, trial: u64) -> SimResult<TrialOutcome> {
        let root = SeedStream::new(self.cfg.seed).child("sensing", trial);
        let (frame, _) = self.frame(waveform, root.child("frame", 0).seed())?;
        let scene = self.cfg.scene_at(snr_db);
        let (legit_map, eve_map) = self.maps(&frame, &scene, root.child("trial", 0).seed())?;
        let legit = ca_cfar(&legit_map, &self.cfar)?;
        let eve = ca_cfar(&eve_map, &self.cfar)?;
        let target = &scene.targets[self.cfg.scene.focus_target];
        Ok(TrialOutcome {
            legit: target_errors(&legit, target, &self.caps),
            eve: target_errors(&eve, target, &self.caps),
            legit_detections: legit,
            eve_detections: eve,
        })
    }
}

/// Result of one sensing trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    /// `(range, velocity)` absolute errors, capped.
    pub legit: (f64, f64),
    pub eve: (f64, f64),
    pub legit_detections: Vec<Detection>,
    pub eve_detections: Vec<Detection>,
}

/// Accumulated errors of both receivers.
#[derive(Debug, Clone, Default)]
pub struct SensingStats {
    pub legit: ErrorAccumulator,
    pub eve: ErrorAccumulator,
}

/// Runs `trials` trials on the worker pool; results are reduced in trial
/// order so they do not depend on scheduling.
pub fn run_trials(setup: &SensingSetup<'_>, waveform: Waveform, snr_db: f64, trials: usize) -> SimResult<SensingStats> {
    let outcomes: Vec<TrialOutcome> = (0..trials as u64)
        .into_par_iter()
        .map(|t| setup.trial(waveform, snr_db, t))
        .collect::<SimResult<_>>()?;
    let mut stats = SensingStats::default();
    for o in &outcomes {
        stats.legit.add(o.legit.0, o.legit.1);
        stats.eve.add(o.eve.0, o.eve.1);
    }
    Ok(stats)
}

/// Per-chirp ghost search in the eavesdropper's matched-filter output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhostReport {
    pub chirps: usize,
    /// Chirps with a CFAR detection at the designed ghost lag.
    pub ghost_hits: usize,
    /// Chirps with a CFAR detection at the true target lag.
    pub target_hits: usize,
}

impl GhostReport {
    pub fn ghost_rate(&self) -> f64 {
        self.ghost_hits as f64 / self.chirps.max(1) as f64
    }

    pub fn target_rate(&self) -> f64 {
        self.target_hits as f64 / self.chirps.max(1) as f64
    }
}

/// Sends a Sec-FMCW frame at a single target at the focus range and looks
/// for CFAR detections at `target lag +- designed offset * (b_max / b_i)`
/// in each chirp's matched-filter output, within `tolerance` lags.
pub fn ghost_search(setup: &SensingSetup<'_>, snr_db: f64, seed: u64, tolerance: f64) -> SimResult<GhostReport> {
    let cb = setup
        .codebook
        .ok_or_else(|| crate::error::SimError::Validation(vec!["ghost search needs a codebook".into()]))?;
    let (frame, entries) = setup.frame(Waveform::Secure, SeedStream::new(seed).child("frame", 0).seed())?;
    let focus = &setup.cfg.scene.targets[setup.cfg.scene.focus_target];
    let mut scene = setup.cfg.scene_at(snr_db);
    scene.targets = vec![TargetSpec {
        range_m: focus.range_m,
        velocity_mps: focus.velocity_mps,
        rcs_amplitude: focus.amplitude.into(),
    }];
    let obs = setup.eve_observation(&frame, &scene, seed)?;
    let z = setup.eve.compress(&obs)?;
    let fs = setup.cfg.band.sample_rate_hz;
    let target_lag = scene.targets[0].delay_s() * fs;
    let offsets = cb.library.primary_offsets();
    let mut report = GhostReport {
        chirps: 0,
        ghost_hits: 0,
        target_hits: 0,
    };
    for (zi, entry) in z.iter().zip(&entries) {
        let Some(entry) = entry else { continue };
        let (u, g) = cb.combined.split(*entry);
        let b = cb.combined.im.pairs()[u].bandwidth_hz;
        let designed = offsets[cb.phase.assigned_ref[g]] as f64 * setup.cfg.band.bw_max_hz / b;
        let power: Vec<f64> = zi.iter().map(Complex64::norm_sqr).collect();
        let det = ca_cfar_1d(&power, setup.cfar.guard.0, setup.cfar.train.0, setup.cfar.pfa)?;
        let near = |lag: f64| det.iter().any(|&d| (d as f64 - lag).abs() <= tolerance);
        report.chirps += 1;
        if near(target_lag) {
            report.target_hits += 1;
        }
        if near(target_lag + designed) || near(target_lag - designed) {
            report.ghost_hits += 1;
        }
    }
    Ok(report)
}

/// Peak location and peak-to-median power ratio of a map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSummary {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub peak_to_median_db: f64,
}

pub fn peak_summary(map: &RangeDopplerMap) -> PeakSummary {
    let (m, l) = map.peak();
    let mut p: Vec<f64> = (0..map.n_range())
        .flat_map(|mm| (0..map.n_doppler()).map(move |ll| (mm, ll)))
        .map(|(mm, ll)| map.power(mm, ll))
        .collect();
    let mid = p.len() / 2;
    let median = *p.select_nth_unstable_by(mid, f64::total_cmp).1;
    PeakSummary {
        range_m: map.grid().range(m),
        velocity_mps: map.velocity_of_bin(l),
        peak_to_median_db: 10.0 * (map.power(m, l) / median.max(f64::MIN_POSITIVE)).log10(),
    }
}

/// Errors of every scene target for a set of detections.
pub fn per_target_errors(dets: &[Detection], scene: &RadarScene, caps: &ErrorCaps) -> Vec<(f64, f64)> {
    scene.targets.iter().map(|t| target_errors(dets, t, caps)).collect()
}
