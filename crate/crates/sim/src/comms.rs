//! Monte-Carlo link simulation for the legitimate user and the
//! communication eavesdropper.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use secfmcw::channel::{comm_propagate, draw_channel, FadingProfile};
use secfmcw::codebook::CombinedCodebook;
use secfmcw::comms_rx::{
    mmse_equalize, score_block, ChannelEstimate, DecodePolicy, Demodulator, EntryLabels, ImTemplates, LinkCounter,
};
use secfmcw::dsp;
use secfmcw::rng::SeedStream;
use secfmcw::waveform::{build_frame, generate_chirp, BandPlan, Frame, PhaseCode, PilotSpec};

use crate::config::ScenarioConfig;
use crate::error::SimResult;

/// Spectrum margin kept around each IM template, in Hz.
const TEMPLATE_MARGIN_HZ: f64 = 1e6;

/// Shared, read-only state of a link simulation.
pub struct LinkSetup {
    pub band: BandPlan,
    pub templates: ImTemplates,
    pub combined: CombinedCodebook,
    /// The eavesdropper's guess of the phase codebook.
    pub eve_codebook: CombinedCodebook,
    pub eve_labels: EntryLabels,
    /// Uncoded full-band chirp the eavesdropper assumes as pilot.
    pub eve_pilot: Vec<Complex64>,
    pub profile: FadingProfile,
    pub pilot: PilotSpec,
    pub frame_chirps: usize,
    pub chirp_duration_s: f64,
    pub order: u32,
    pub seed: SeedStream,
}

impl LinkSetup {
    pub fn new(cfg: &ScenarioConfig, combined: &CombinedCodebook) -> SimResult<Self> {
        let band = cfg.band_plan()?;
        let c = &cfg.codebook;
        let t = cfg.band.chirp_duration_s;
        let templates = ImTemplates::new(&combined.im, &band, t, c.code_len, TEMPLATE_MARGIN_HZ)?;
        let root = SeedStream::new(cfg.seed);
        let mut eve_rng = root.rng_for("eve-codebook", 0);
        let guessed: Vec<PhaseCode> = (0..combined.phase.len())
            .map(|_| PhaseCode::random(c.code_len, c.order, &mut eve_rng))
            .collect();
        let eve_codebook = CombinedCodebook::new(combined.im.clone(), guessed)?;
        let eve_labels = EntryLabels::random(combined.size(), combined.bit_width(), root.child("eve-labels", 0).seed());
        let eve_pilot = dsp::fft_unitary(
            &generate_chirp(&band.chirp(0.0, cfg.band.allocated_band_hz, PhaseCode::zeros(c.code_len, c.order), t)?)?.samples,
        );
        Ok(Self {
            band,
            templates,
            combined: combined.clone(),
            eve_codebook,
            eve_labels,
            eve_pilot,
            profile: FadingProfile {
                taps: cfg.comm.taps,
                decay_db_per_tap: cfg.comm.decay_db_per_tap,
                xpd_db: cfg.comm.xpd_db,
            },
            pilot: PilotSpec {
                period: cfg.frame.pilot_period,
                code_len: c.code_len,
                order: c.order,
                seed: root.child("pilot", 0).seed(),
            },
            frame_chirps: cfg.comm.frame_chirps,
            chirp_duration_s: t,
            order: c.order,
            seed: root,
        })
    }

    pub fn user(&self) -> Demodulator<'_> {
        Demodulator {
            templates: &self.templates,
            codebook: self.combined.clone(),
            order: self.order,
            policy: DecodePolicy::default(),
            labels: EntryLabels::Identity,
        }
    }

    pub fn eavesdropper(&self) -> Demodulator<'_> {
        Demodulator {
            templates: &self.templates,
            codebook: self.eve_codebook.clone(),
            order: self.order,
            policy: DecodePolicy::default(),
            labels: self.eve_labels.clone(),
        }
    }

    /// Bits carried per block (both polarizations).
    pub fn bits_per_block(&self) -> usize {
        2 * self.combined.bit_width()
    }

    /// Random payload of one frame: per data chirp, the bits and the
    /// `(V, H)` entries they map to.
    pub fn payload(&self, seed: u64) -> SimResult<Vec<(Vec<bool>, u64, u64)>> {
        let mut rng = SeedStream::new(seed).rng_for("payload", 0);
        let w = self.bits_per_block();
        (0..self.frame_chirps)
            .map(|_| {
                let bits: Vec<bool> = (0..w).map(|_| rng.random()).collect();
                let (v, h) = self.combined.encode_bits(&bits)?;
                Ok((bits, v, h))
            })
            .collect()
    }

    pub fn build(&self, payload: &[(Vec<bool>, u64, u64)]) -> SimResult<Frame> {
        let t = self.chirp_duration_s;
        let v = payload
            .iter()
            .map(|p| self.combined.chirp(p.1, &self.band, t))
            .collect::<secfmcw::Result<Vec<_>>>()?;
        let h = payload
            .iter()
            .map(|p| self.combined.chirp(p.2, &self.band, t))
            .collect::<secfmcw::Result<Vec<_>>>()?;
        Ok(build_frame(&v, &h, &self.band, &self.pilot, 1.0)?)
    }

    /// Simulates one frame; the eavesdropper decodes only the first
    /// `eve_limit` data chirps.
    pub fn frame(&self, sigma_n2: f64, index: u64, eve_limit: usize) -> SimResult<FrameCounts> {
        let root = self.seed.child("link-frame", index);
        let payload = self.payload(root.child("payload", 0).seed())?;
        let frame = self.build(&payload)?;
        let n = frame.chirps_v[0].len();
        let state = draw_channel(&self.profile, n, sigma_n2, root.child("channel", 0).seed());
        let (ys_v, ys_h) = comm_propagate(&frame, &state, root.child("noise", 0).seed())?;
        let user = self.user();
        let eve = self.eavesdropper();
        let mut counts = FrameCounts::default();
        let pilots = &frame.pilot_positions;
        let mut data_index = 0;
        for (k, &p) in pilots.iter().enumerate() {
            let end = pilots.get(k + 1).copied().unwrap_or(frame.len());
            let u_v = dsp::fft_unitary(&frame.chirps_v[p].samples);
            let u_h = dsp::fft_unitary(&frame.chirps_h[p].samples);
            let est_user = ChannelEstimate::from_pilots(
                &ys_v[p],
                &ys_h[p],
                &u_v,
                &u_h,
                state.sigma_n2,
                state.sigma_i2,
                end - 1,
            )?;
            let est_eve = ChannelEstimate::from_pilots(
                &ys_v[p],
                &ys_h[p],
                &self.eve_pilot,
                &self.eve_pilot,
                state.sigma_n2,
                state.sigma_i2,
                end - 1,
            )?;
            for i in p + 1..end {
                let (bits, ev, eh) = &payload[data_index];
                data_index += 1;
                let truth_im = [self.combined.split(*ev).0, self.combined.split(*eh).0];
                let run = |rx: &Demodulator<'_>, est: &ChannelEstimate, counter: &mut LinkCounter| -> SimResult<()> {
                    let eq_v = mmse_equalize(&ys_v[i], &est.h_v_hat, state.sigma_n2, state.sigma_i2, i, est.valid_until)?;
                    let eq_h = mmse_equalize(&ys_h[i], &est.h_h_hat, state.sigma_n2, state.sigma_i2, i, est.valid_until)?;
                    let rv = rx.demodulate(&eq_v)?;
                    let rh = rx.demodulate(&eq_h)?;
                    score_block(rx, [&rv, &rh], bits, truth_im, counter);
                    Ok(())
                };
                run(&user, &est_user, &mut counts.user)?;
                if data_index <= eve_limit {
                    run(&eve, &est_eve, &mut counts.eve)?;
                }
            }
        }
        Ok(counts)
    }
}

/// Error counts of one or more frames.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameCounts {
    pub user: LinkCounter,
    pub eve: LinkCounter,
}

/// Runs enough frames for `user_chirps` legitimate and `eve_chirps`
/// eavesdropper data chirps at one SNR; the eavesdropper sees the same
/// frames. Frames are reduced in index order.
pub fn simulate_link(setup: &LinkSetup, snr_db: f64, user_chirps: usize, eve_chirps: usize) -> SimResult<FrameCounts> {
    let per = setup.frame_chirps.max(1);
    let frames = user_chirps.max(eve_chirps).div_ceil(per);
    let sigma_n2 = 10f64.powf(-snr_db / 10.0);
    let snr_key = (snr_db * 1000.0).round() as i64 as u64;
    let results: Vec<FrameCounts> = (0..frames as u64)
        .into_par_iter()
        .map(|f| {
            let eve_limit = eve_chirps.saturating_sub(f as usize * per);
            let index = snr_key.wrapping_mul(1_000_003).wrapping_add(f);
            let mut c = setup.frame(sigma_n2, index, eve_limit)?;
            let user_limit = user_chirps.saturating_sub(f as usize * per);
            if user_limit == 0 {
                c.user = LinkCounter::default();
            }
            Ok(c)
        })
        .collect::<SimResult<_>>()?;
    let mut total = FrameCounts::default();
    for r in &results {
        total.user.merge(&r.user);
        total.eve.merge(&r.eve);
    }
    Ok(total)
}
