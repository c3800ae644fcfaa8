//! Propagation: radar echoes, the eavesdropper's reference and echoes, and
//! the dual-polarized block-fading communication channel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dsp;
use crate::error::{Error, Result};
use crate::rng::{SeedStream, StreamRng};
use crate::waveform::{BandPlan, ChirpParams, ChirpSamples, Frame};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Point target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    pub range_m: f64,
    /// Positive when approaching.
    pub velocity_mps: f64,
    pub rcs_amplitude: Complex64,
}

impl TargetSpec {
    pub fn new(range_m: f64, velocity_mps: f64) -> Self {
        Self {
            range_m,
            velocity_mps,
            rcs_amplitude: Complex64::new(1.0, 0.0),
        }
    }

    /// Round-trip delay `2R/c`.
    pub fn delay_s(&self) -> f64 {
        2.0 * self.range_m / SPEED_OF_LIGHT
    }
}

/// Sensing scene seen by a monostatic receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarScene {
    pub targets: Vec<TargetSpec>,
    pub carrier_hz: f64,
    /// Per-sample SNR of a unit-amplitude target echo.
    pub snr_db: f64,
    pub n_chirps: usize,
    pub pri_s: f64,
}

impl RadarScene {
    /// The three-target scene used throughout the evaluation.
    pub fn three_targets(snr_db: f64) -> Self {
        Self {
            targets: vec![
                TargetSpec::new(45.0, 15.0),
                TargetSpec::new(100.0, -25.0),
                TargetSpec::new(160.0, 25.0),
            ],
            carrier_hz: 2.4e9,
            snr_db,
            n_chirps: 64,
            pri_s: 1e-3,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// `2 v / lambda`.
    pub fn doppler_hz(&self, velocity_mps: f64) -> f64 {
        2.0 * velocity_mps / self.wavelength()
    }

    pub fn noise_variance(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    pub fn validate(&self, chirp_duration_s: f64) -> Result<()> {
        if self.n_chirps == 0 {
            return Err(Error::Config("scene needs at least one chirp".into()));
        }
        if !(self.pri_s > 0.0 && self.carrier_hz > 0.0) {
            return Err(Error::Config("PRI and carrier must be positive".into()));
        }
        for t in &self.targets {
            if !(t.range_m >= 0.0) {
                return Err(Error::Config(format!("negative range {}", t.range_m)));
            }
            if t.delay_s() >= chirp_duration_s {
                return Err(Error::Config(format!("target at {} m echoes past the chirp", t.range_m)));
            }
            if self.doppler_hz(t.velocity_mps).abs() >= 0.5 / self.pri_s {
                return Err(Error::Config(format!("velocity {} m/s is Doppler-ambiguous", t.velocity_mps)));
            }
        }
        Ok(())
    }
}

/// Sweep that defines zero hop offset: `(f_ref, b_ref)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopReference {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
}

impl HopReference {
    /// Band centre at the widest bandwidth, matching the codebook anchor.
    pub fn for_band(band: &BandPlan) -> Self {
        Self {
            center_hz: 0.0,
            bandwidth_hz: band.bw_max_hz,
        }
    }

    /// `(Delta f, Delta S)` of a chirp.
    pub fn offsets(&self, params: &ChirpParams) -> (f64, f64) {
        (
            params.center_hz - self.center_hz,
            (params.bandwidth_hz - self.bandwidth_hz) / params.duration_s,
        )
    }

    /// Deterministic hop phase `-2 pi Df tau + pi DS tau^2` a chirp's echo
    /// acquires at delay `tau`.
    pub fn phase(&self, params: &ChirpParams, tau: f64) -> f64 {
        let (df, ds) = self.offsets(params);
        hop_phase(df, ds, tau)
    }
}

pub fn hop_phase(delta_f_hz: f64, delta_s_hz_per_s: f64, tau_s: f64) -> f64 {
    -2.0 * PI * delta_f_hz * tau_s + PI * delta_s_hz_per_s * tau_s * tau_s
}

fn cn(rng: &mut StreamRng, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

fn add_noise(buf: &mut [Complex64], variance: f64, rng: &mut StreamRng) {
    if variance > 0.0 {
        buf.iter_mut().for_each(|v| *v += cn(rng, variance));
    }
}

/// Delays one chirp by a sum of weighted fractional delays (circular,
/// applied as a linear phase in frequency).
fn delayed_sum(x: &[Complex64], fs: f64, paths: &[(f64, Complex64)]) -> Vec<Complex64> {
    let n = x.len();
    let mut spec = dsp::fft(x);
    for (k, v) in spec.iter_mut().enumerate() {
        let f = dsp::signed_bin(k, n) as f64 * fs / n as f64;
        let gain: Complex64 = paths
            .iter()
            .map(|(tau, a)| a * Complex64::from_polar(1.0, -2.0 * PI * f * tau))
            .sum();
        *v *= gain;
    }
    dsp::ifft_in_place(&mut spec);
    spec
}

/// Echo matrix (`n_chirps x Ns`) for the scene, stop-and-hop model.
fn synthesize_echo(
    chirps: &[ChirpSamples],
    scene: &RadarScene,
    hop: &HopReference,
    seed: u64,
    label: &str,
) -> Result<Vec<Vec<Complex64>>> {
    let first = chirps
        .first()
        .ok_or_else(|| Error::Config("no chirps to transmit".into()))?;
    scene.validate(first.params.duration_s)?;
    if chirps.len() < scene.n_chirps {
        return Err(Error::LengthMismatch {
            expected: scene.n_chirps,
            actual: chirps.len(),
        });
    }
    let root = SeedStream::new(seed);
    let var = scene.noise_variance();
    let mut out = Vec::with_capacity(scene.n_chirps);
    for (i, x) in chirps.iter().take(scene.n_chirps).enumerate() {
        let t_i = i as f64 * scene.pri_s;
        let paths: Vec<(f64, Complex64)> = scene
            .targets
            .iter()
            .map(|t| {
                let tau = t.delay_s();
                let phase = 2.0 * PI * scene.doppler_hz(t.velocity_mps) * t_i
                    - 2.0 * PI * scene.carrier_hz * tau
                    + hop.phase(&x.params, tau);
                (tau, t.rcs_amplitude * Complex64::from_polar(1.0, phase))
            })
            .collect();
        let mut r = if paths.is_empty() {
            vec![Complex64::new(0.0, 0.0); x.len()]
        } else {
            delayed_sum(&x.samples, x.params.sample_rate_hz, &paths)
        };
        add_noise(&mut r, var, &mut root.rng_for(label, i as u64));
        out.push(r);
    }
    Ok(out)
}

/// Echoes at the ISAC base station from the first `n_chirps` chirps of the
/// frame (V polarization).
pub fn radar_echo(frame: &Frame, scene: &RadarScene, hop: &HopReference, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    synthesize_echo(&frame.chirps_v, scene, hop, seed, "radar-noise")
}

/// Echoes at the sensing eavesdropper: same geometry, independent noise.
pub fn eve_echo(frame: &Frame, scene: &RadarScene, hop: &HopReference, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    synthesize_echo(&frame.chirps_v, scene, hop, seed, "eve-echo-noise")
}

/// Eavesdropper's reference settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveReferenceLink {
    pub distance_m: f64,
    /// `None` for a noiseless reference.
    pub snr_db: Option<f64>,
    pub carrier_hz: f64,
}

/// Noisy delayed copy of the transmitted chirps seen on the direct path
/// to the eavesdropper.
pub fn eve_reference(
    frame: &Frame,
    n_chirps: usize,
    link: &EveReferenceLink,
    hop: &HopReference,
    seed: u64,
) -> Result<Vec<Vec<Complex64>>> {
    if !(link.distance_m >= 0.0) {
        return Err(Error::Config("reference distance must be non-negative".into()));
    }
    if frame.chirps_v.len() < n_chirps {
        return Err(Error::LengthMismatch {
            expected: n_chirps,
            actual: frame.chirps_v.len(),
        });
    }
    let tau = link.distance_m / SPEED_OF_LIGHT;
    let root = SeedStream::new(seed);
    let var = link.snr_db.map_or(0.0, |s| 10f64.powf(-s / 10.0));
    let mut out = Vec::with_capacity(n_chirps);
    for (i, x) in frame.chirps_v.iter().take(n_chirps).enumerate() {
        let mut r = if tau == 0.0 {
            x.samples.clone()
        } else {
            let phase = -2.0 * PI * link.carrier_hz * tau + hop.phase(&x.params, tau);
            delayed_sum(&x.samples, x.params.sample_rate_hz, &[(tau, Complex64::from_polar(1.0, phase))])
        };
        add_noise(&mut r, var, &mut root.rng_for("eve-reference-noise", i as u64));
        out.push(r);
    }
    Ok(out)
}

/// Statistics of the communication channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingProfile {
    pub taps: usize,
    pub decay_db_per_tap: f64,
    /// Co-polar to cross-polar power ratio.
    pub xpd_db: f64,
}

impl Default for FadingProfile {
    fn default() -> Self {
        Self {
            taps: 4,
            decay_db_per_tap: 3.0,
            xpd_db: 15.0,
        }
    }
}

impl FadingProfile {
    /// Tap powers normalized to unit sum.
    pub fn tap_powers(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.taps.max(1))
            .map(|t| 10f64.powf(-self.decay_db_per_tap * t as f64 / 10.0))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|p| p / total).collect()
    }

    pub fn cross_power(&self) -> f64 {
        10f64.powf(-self.xpd_db / 10.0)
    }

    /// Analytic frequency correlation `E[h[k] conj(h[k + d])]` of an
    /// `n`-bin response.
    pub fn frequency_correlation(&self, n: usize, lag: usize) -> Complex64 {
        self.tap_powers()
            .iter()
            .enumerate()
            .map(|(t, p)| p * Complex64::from_polar(1.0, 2.0 * PI * (t * lag) as f64 / n as f64))
            .sum()
    }
}

/// Per-bin channel of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CommChannelState {
    pub h_v: Vec<Complex64>,
    pub h_h: Vec<Complex64>,
    /// H transmit leaking into V receive.
    pub h_hv: Vec<Complex64>,
    /// V transmit leaking into H receive.
    pub h_vh: Vec<Complex64>,
    pub sigma_n2: f64,
    pub sigma_i2: f64,
}

impl CommChannelState {
    /// Flat unit co-polar channel without leakage.
    pub fn identity(n: usize, sigma_n2: f64) -> Self {
        let one = vec![Complex64::new(1.0, 0.0); n];
        let zero = vec![Complex64::new(0.0, 0.0); n];
        Self {
            h_v: one.clone(),
            h_h: one,
            h_hv: zero.clone(),
            h_vh: zero,
            sigma_n2,
            sigma_i2: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.h_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_v.is_empty()
    }
}

/// Draws a Rayleigh block-fading channel: each branch is the DFT of an
/// independent tap vector with the profile's power-delay profile.
pub fn draw_channel(profile: &FadingProfile, n: usize, sigma_n2: f64, seed: u64) -> CommChannelState {
    let powers = profile.tap_powers();
    let mut rng = SeedStream::new(seed).rng_for("comm-channel", 0);
    let mut branch = |scale: f64| -> Vec<Complex64> {
        let mut taps = vec![Complex64::new(0.0, 0.0); n];
        for (t, p) in powers.iter().enumerate().take(n) {
            taps[t] = cn(&mut rng, p * scale);
        }
        dsp::fft(&taps)
    };
    let cross = profile.cross_power();
    CommChannelState {
        h_v: branch(1.0),
        h_h: branch(1.0),
        h_hv: branch(cross),
        h_vh: branch(cross),
        sigma_n2,
        sigma_i2: cross,
    }
}

/// Per-chirp spectra of the V and H receive ports.
pub type DualSpectra = (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>);

/// Received unitary spectra `(y_v, y_h)` of every chirp in the frame.
pub fn comm_propagate(frame: &Frame, state: &CommChannelState, seed: u64) -> Result<DualSpectra> {
    let root = SeedStream::new(seed);
    let mut ys_v = Vec::with_capacity(frame.len());
    let mut ys_h = Vec::with_capacity(frame.len());
    for (i, (xv, xh)) in frame.chirps_v.iter().zip(&frame.chirps_h).enumerate() {
        let n = xv.len();
        if state.len() != n || xh.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: state.len(),
            });
        }
        let uv = dsp::fft_unitary(&xv.samples);
        let uh = dsp::fft_unitary(&xh.samples);
        let mut rng = root.rng_for("comm-noise", i as u64);
        let mut yv = Vec::with_capacity(n);
        let mut yh = Vec::with_capacity(n);
        for k in 0..n {
            yv.push(state.h_v[k] * uv[k] + state.h_hv[k] * uh[k]);
            yh.push(state.h_h[k] * uh[k] + state.h_vh[k] * uv[k]);
        }
        add_noise(&mut yv, state.sigma_n2, &mut rng);
        add_noise(&mut yh, state.sigma_n2, &mut rng);
        ys_v.push(yv);
        ys_h.push(yh);
    }
    Ok((ys_v, ys_h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{sensing_frame, PhaseCode};

    fn plain_frame(n: usize) -> Frame {
        let band = BandPlan::default();
        let p = band.chirp(0.0, 50e6, PhaseCode::zeros(40, 256), 20e-6).unwrap();
        sensing_frame(&vec![p; n], 1e-3).unwrap()
    }

    fn scene(targets: Vec<TargetSpec>, snr_db: f64, n: usize) -> RadarScene {
        RadarScene {
            targets,
            carrier_hz: 2.4e9,
            snr_db,
            n_chirps: n,
            pri_s: 1e-3,
        }
    }

    #[test]
    fn noise_only_echo_variance() {
        let frame = plain_frame(50);
        let hop = HopReference::for_band(&BandPlan::default());
        let r = radar_echo(&frame, &scene(vec![], 20.0, 50), &hop, 9).unwrap();
        let n: usize = r.iter().map(Vec::len).sum();
        let p: f64 = r.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        assert!((p / 0.01 - 1.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn static_target_delay() {
        let frame = plain_frame(1);
        let hop = HopReference::for_band(&BandPlan::default());
        let mut sc = scene(vec![TargetSpec::new(150.0, 0.0)], 0.0, 1);
        sc.snr_db = f64::INFINITY;
        let r = radar_echo(&frame, &sc, &hop, 0).unwrap();
        let z = dsp::circular_xcorr(&r[0], &frame.chirps_v[0].samples);
        let peak = (0..z.len()).max_by(|&a, &b| z[a].norm().total_cmp(&z[b].norm())).unwrap();
        assert_eq!(peak, 100);
    }

    #[test]
    fn scene_validation() {
        let mut sc = RadarScene::three_targets(20.0);
        assert!(sc.validate(20e-6).is_ok());
        sc.targets.push(TargetSpec::new(4000.0, 0.0));
        assert!(sc.validate(20e-6).is_err());
        let mut sc = RadarScene::three_targets(20.0);
        sc.targets[0].velocity_mps = 40.0;
        assert!(sc.validate(20e-6).is_err());
    }

    #[test]
    fn reference_exact_without_noise() {
        let frame = plain_frame(2);
        let hop = HopReference::for_band(&BandPlan::default());
        let link = EveReferenceLink {
            distance_m: 0.0,
            snr_db: None,
            carrier_hz: 2.4e9,
        };
        let r = eve_reference(&frame, 2, &link, &hop, 1).unwrap();
        assert_eq!(r[1], frame.chirps_v[1].samples);
    }

    #[test]
    fn identity_channel_passes_spectrum() {
        let frame = plain_frame(2);
        let state = CommChannelState::identity(2000, 0.0);
        let (yv, _) = comm_propagate(&frame, &state, 0).unwrap();
        let u = dsp::fft_unitary(&frame.chirps_v[0].samples);
        for (a, b) in yv[0].iter().zip(&u) {
            assert!((a - b).norm() < 1e-12);
        }
        let bad = CommChannelState::identity(10, 0.0);
        assert!(comm_propagate(&frame, &bad, 0).is_err());
    }
}
