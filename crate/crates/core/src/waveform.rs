//! Chirp synthesis: index-modulated, phase-coded FMCW chirps, pilots and
//! transmission frames.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Frequency plan shared by the transmitter and every receiver.
///
/// The allocated band is centred on complex-baseband zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPlan {
    pub allocated_band_hz: f64,
    pub bw_min_hz: f64,
    pub bw_max_hz: f64,
    pub step_hz: f64,
    pub sample_rate_hz: f64,
}

impl Default for BandPlan {
    fn default() -> Self {
        Self {
            allocated_band_hz: 80e6,
            bw_min_hz: 30e6,
            bw_max_hz: 50e6,
            step_hz: 1e6,
            sample_rate_hz: 100e6,
        }
    }
}

/// True when `x` is within a relative tolerance of an integer.
pub(crate) fn near_integer(x: f64) -> bool {
    (x - x.round()).abs() <= 1e-9 * x.abs().max(1.0)
}

impl BandPlan {
    pub fn new(
        allocated_band_hz: f64,
        bw_min_hz: f64,
        bw_max_hz: f64,
        step_hz: f64,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        let plan = Self {
            allocated_band_hz,
            bw_min_hz,
            bw_max_hz,
            step_hz,
            sample_rate_hz,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.allocated_band_hz,
            self.bw_min_hz,
            self.bw_max_hz,
            self.step_hz,
            self.sample_rate_hz,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("band plan values must be finite".into()));
        }
        if self.step_hz <= 0.0 || self.bw_min_hz < 0.0 {
            return Err(Error::Config("step must be positive and bw_min non-negative".into()));
        }
        if !(self.bw_min_hz <= self.bw_max_hz && self.bw_max_hz <= self.allocated_band_hz) {
            return Err(Error::Config(format!(
                "need bw_min <= bw_max <= allocated band, got {} / {} / {}",
                self.bw_min_hz, self.bw_max_hz, self.allocated_band_hz
            )));
        }
        if !near_integer((self.bw_max_hz - self.bw_min_hz) / self.step_hz) {
            return Err(Error::Config("step must divide bw_max - bw_min".into()));
        }
        if self.sample_rate_hz < self.allocated_band_hz {
            return Err(Error::Config(format!(
                "sample rate {} Hz does not cover the {} Hz band",
                self.sample_rate_hz, self.allocated_band_hz
            )));
        }
        Ok(())
    }

    /// Lowest and highest baseband frequency of the allocated band.
    pub fn edges(&self) -> (f64, f64) {
        (-0.5 * self.allocated_band_hz, 0.5 * self.allocated_band_hz)
    }

    /// Whether `[f - b/2, f + b/2]` lies inside the band (with a 1 Hz slack
    /// for grid rounding).
    pub fn contains(&self, center_hz: f64, bandwidth_hz: f64) -> bool {
        let (lo, hi) = self.edges();
        center_hz - 0.5 * bandwidth_hz >= lo - 1.0 && center_hz + 0.5 * bandwidth_hz <= hi + 1.0
    }

    /// Builds chirp parameters after checking band containment.
    pub fn chirp(
        &self,
        center_hz: f64,
        bandwidth_hz: f64,
        code: PhaseCode,
        duration_s: f64,
    ) -> Result<ChirpParams> {
        if !self.contains(center_hz, bandwidth_hz) {
            return Err(Error::Config(format!(
                "chirp [{} +- {}] Hz leaves the allocated band",
                center_hz,
                bandwidth_hz / 2.0
            )));
        }
        ChirpParams::new(center_hz, bandwidth_hz, code, duration_s, self.sample_rate_hz)
    }
}

/// An `L`-chip M-PSK phase code stored as phase indices `m`, with chip
/// phase `2 pi m / M`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhaseCode {
    order: u32,
    chips: Vec<u32>,
}

impl PhaseCode {
    pub fn new(chips: Vec<u32>, order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("PSK order must be at least 1".into()));
        }
        if chips.is_empty() {
            return Err(Error::Config("phase code needs at least one chip".into()));
        }
        if let Some(bad) = chips.iter().find(|&&m| m >= order) {
            return Err(Error::Config(format!("phase index {bad} outside {order}-PSK")));
        }
        Ok(Self { order, chips })
    }

    /// All-zero code, i.e. a plain chirp.
    pub fn zeros(len: usize, order: u32) -> Self {
        Self {
            order: order.max(1),
            chips: vec![0; len.max(1)],
        }
    }

    /// Uniformly random code.
    pub fn random<R: Rng + ?Sized>(len: usize, order: u32, rng: &mut R) -> Self {
        let order = order.max(1);
        Self {
            order,
            chips: (0..len.max(1)).map(|_| rng.random_range(0..order)).collect(),
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.chips
    }

    pub fn phase(&self, chip: usize) -> f64 {
        2.0 * PI * f64::from(self.chips[chip]) / f64::from(self.order)
    }

    pub fn phases(&self) -> Vec<f64> {
        (0..self.chips.len()).map(|l| self.phase(l)).collect()
    }
}

/// One codeword realized as waveform parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpParams {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub code: PhaseCode,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
}

impl ChirpParams {
    /// Checks timing and chip alignment. Band containment is checked by
    /// [`BandPlan::chirp`].
    pub fn new(
        center_hz: f64,
        bandwidth_hz: f64,
        code: PhaseCode,
        duration_s: f64,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        if !(duration_s > 0.0 && sample_rate_hz > 0.0) || !duration_s.is_finite() {
            return Err(Error::Config("duration and sample rate must be positive".into()));
        }
        if !(bandwidth_hz >= 0.0) || !center_hz.is_finite() {
            return Err(Error::Config("bandwidth must be non-negative and finite".into()));
        }
        let params = Self {
            center_hz,
            bandwidth_hz,
            code,
            duration_s,
            sample_rate_hz,
        };
        let ns = params.num_samples();
        if ns < 1 || !ns.is_multiple_of(params.code.len()) {
            return Err(Error::Config(format!(
                "code length {} does not divide the {} samples per chirp",
                params.code.len(),
                ns
            )));
        }
        Ok(params)
    }

    /// `Ns = round(T_c * fs)`.
    pub fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    /// Sweep rate `b / T_c` in Hz/s.
    pub fn slope(&self) -> f64 {
        self.bandwidth_hz / self.duration_s
    }

    /// Same chirp with a different phase code.
    pub fn with_code(&self, code: PhaseCode) -> Result<Self> {
        Self::new(self.center_hz, self.bandwidth_hz, code, self.duration_s, self.sample_rate_hz)
    }
}

/// Generated chirp samples together with their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpSamples {
    pub samples: Vec<Complex64>,
    pub params: ChirpParams,
}

impl ChirpSamples {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Sweep phase `theta(t) = pi (b/T_c) t^2 + 2 pi (f - b/2) t`.
pub fn instantaneous_phase(params: &ChirpParams, t: f64) -> Result<f64> {
    let tc = params.duration_s;
    if !(t >= 0.0 && t <= tc * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("t = {t} s outside [0, {tc}]")));
    }
    Ok(sweep_phase(params, t))
}

fn sweep_phase(params: &ChirpParams, t: f64) -> f64 {
    let b = params.bandwidth_hz;
    PI * params.slope() * t * t + 2.0 * PI * (params.center_hz - 0.5 * b) * t
}

/// Chip index of sample `n`.
pub fn chip_of_sample(n: usize, ns: usize, code_len: usize) -> usize {
    n * code_len / ns
}

/// Synthesizes `exp(j (theta(n/fs) + phi_l))`.
pub fn generate_chirp(params: &ChirpParams) -> Result<ChirpSamples> {
    let ns = params.num_samples();
    let code_len = params.code.len();
    if ns == 0 || !ns.is_multiple_of(code_len) {
        return Err(Error::Config(format!(
            "code length {code_len} does not divide {ns} samples"
        )));
    }
    let phases = params.code.phases();
    let dt = 1.0 / params.sample_rate_hz;
    let samples = (0..ns)
        .map(|n| {
            let theta = sweep_phase(params, n as f64 * dt);
            Complex64::from_polar(1.0, theta + phases[chip_of_sample(n, ns, code_len)])
        })
        .collect();
    Ok(ChirpSamples {
        samples,
        params: params.clone(),
    })
}

/// Pseudo-random pilot parameters: full allocated band, centred, with a
/// seeded `code_len`-chip `order`-PSK code.
pub fn pilot_params(
    band: &BandPlan,
    duration_s: f64,
    code_len: usize,
    order: u32,
    seed: u64,
) -> Result<ChirpParams> {
    let mut rng = SeedStream::new(seed).rng_for("pilot-code", 0);
    let code = PhaseCode::random(code_len, order, &mut rng);
    band.chirp(0.0, band.allocated_band_hz, code, duration_s)
}

/// Full-band pilot chirp with a seeded pseudo-random phase code.
pub fn generate_pilot(
    band: &BandPlan,
    duration_s: f64,
    code_len: usize,
    order: u32,
    seed: u64,
) -> Result<ChirpSamples> {
    generate_chirp(&pilot_params(band, duration_s, code_len, order, seed)?)
}

/// Pilot schedule and coding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotSpec {
    /// Data chirps per pilot.
    pub period: usize,
    pub code_len: usize,
    pub order: u32,
    pub seed: u64,
}

impl Default for PilotSpec {
    fn default() -> Self {
        Self {
            period: 16,
            code_len: 40,
            order: 256,
            seed: 0,
        }
    }
}

/// Polarization branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    V,
    H,
}

/// A transmission frame in both polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub chirps_v: Vec<ChirpSamples>,
    pub chirps_h: Vec<ChirpSamples>,
    pub pilot_positions: Vec<usize>,
    pub chirp_repetition_interval_s: f64,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.chirps_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chirps_v.is_empty()
    }

    pub fn is_pilot(&self, index: usize) -> bool {
        self.pilot_positions.binary_search(&index).is_ok()
    }

    /// Indices of data chirps in transmission order.
    pub fn data_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_pilot(i)).collect()
    }

    pub fn chirps(&self, pol: Polarization) -> &[ChirpSamples] {
        match pol {
            Polarization::V => &self.chirps_v,
            Polarization::H => &self.chirps_h,
        }
    }
}

/// Interleaves one pilot before every `pilot.period` data chirps, in both
/// polarizations. Pilot codes differ per pilot and per polarization.
pub fn build_frame(
    codewords_v: &[ChirpParams],
    codewords_h: &[ChirpParams],
    band: &BandPlan,
    pilot: &PilotSpec,
    pri_s: f64,
) -> Result<Frame> {
    if codewords_v.is_empty() {
        return Err(Error::Config("frame needs at least one data codeword".into()));
    }
    if codewords_v.len() != codewords_h.len() {
        return Err(Error::LengthMismatch {
            expected: codewords_v.len(),
            actual: codewords_h.len(),
        });
    }
    if pilot.period == 0 {
        return Err(Error::Config("pilot period must be positive".into()));
    }
    let duration = codewords_v[0].duration_s;
    let root = SeedStream::new(pilot.seed);
    let pilot_seed = |pol: u64, k: u64| root.child("pilot", 2 * k + pol).seed();

    let mut frame = Frame {
        chirps_v: Vec::new(),
        chirps_h: Vec::new(),
        pilot_positions: Vec::new(),
        chirp_repetition_interval_s: pri_s,
    };
    for (k, (block_v, block_h)) in codewords_v
        .chunks(pilot.period)
        .zip(codewords_h.chunks(pilot.period))
        .enumerate()
    {
        frame.pilot_positions.push(frame.chirps_v.len());
        let k = k as u64;
        frame.chirps_v.push(generate_pilot(band, duration, pilot.code_len, pilot.order, pilot_seed(0, k))?);
        frame.chirps_h.push(generate_pilot(band, duration, pilot.code_len, pilot.order, pilot_seed(1, k))?);
        for (v, h) in block_v.iter().zip(block_h) {
            frame.chirps_v.push(generate_chirp(v)?);
            frame.chirps_h.push(generate_chirp(h)?);
        }
    }
    Ok(frame)
}

/// Frame without pilots (sensing-only experiments).
pub fn sensing_frame(codewords: &[ChirpParams], pri_s: f64) -> Result<Frame> {
    if codewords.is_empty() {
        return Err(Error::Config("frame needs at least one codeword".into()));
    }
    let chirps: Vec<ChirpSamples> = codewords.iter().map(generate_chirp).collect::<Result<_>>()?;
    Ok(Frame {
        chirps_h: chirps.clone(),
        chirps_v: chirps,
        pilot_positions: Vec::new(),
        chirp_repetition_interval_s: pri_s,
    })
}
