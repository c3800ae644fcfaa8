//! Communication receivers: pilot-based LMMSE channel estimation, MMSE
//! equalization, two-stage ML demodulation (index modulation, then phase
//! code), codebook decoding and link scoring.
//!
//! The same machinery serves the legitimate user and the communication
//! eavesdropper; the eavesdropper simply holds the wrong pilots, the wrong
//! codebook and the wrong bit labels.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::SliceRandom;

use crate::codebook::{CombinedCodebook, ImIndexSet};
use crate::dsp;
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::waveform::{generate_chirp, BandPlan, PhaseCode};

/// Per-bin channel estimates for both polarizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_v_hat: Vec<Complex64>,
    pub h_h_hat: Vec<Complex64>,
    /// Last chirp index this estimate may be used for.
    pub valid_until: usize,
    /// Bins that could not be estimated (zero pilot, zero regularization).
    pub invalid_bins: usize,
}

/// `(y u*) / (|u|^2 + sigma_n^2 + sigma_i^2)` per bin.
pub fn lmmse_channel_estimate(
    y_p: &[Complex64],
    u_p: &[Complex64],
    sigma_n2: f64,
    sigma_i2: f64,
) -> Result<(Vec<Complex64>, usize)> {
    if y_p.len() != u_p.len() {
        return Err(Error::LengthMismatch {
            expected: u_p.len(),
            actual: y_p.len(),
        });
    }
    if sigma_n2 < 0.0 || sigma_i2 < 0.0 {
        return Err(Error::Domain("variances must be non-negative".into()));
    }
    let reg = sigma_n2 + sigma_i2;
    let mut invalid = 0;
    let h = y_p
        .iter()
        .zip(u_p)
        .map(|(y, u)| {
            let den = u.norm_sqr() + reg;
            if den > 0.0 {
                y * u.conj() / den
            } else {
                invalid += 1;
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok((h, invalid))
}

impl ChannelEstimate {
    /// Estimates both branches from one received pilot pair.
    #[allow(clippy::too_many_arguments)]
    pub fn from_pilots(
        y_v: &[Complex64],
        y_h: &[Complex64],
        u_v: &[Complex64],
        u_h: &[Complex64],
        sigma_n2: f64,
        sigma_i2: f64,
        valid_until: usize,
    ) -> Result<Self> {
        let (h_v_hat, a) = lmmse_channel_estimate(y_v, u_v, sigma_n2, sigma_i2)?;
        let (h_h_hat, b) = lmmse_channel_estimate(y_h, u_h, sigma_n2, sigma_i2)?;
        Ok(Self {
            h_v_hat,
            h_h_hat,
            valid_until,
            invalid_bins: a + b,
        })
    }
}

/// Equalized chirp in both domains.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    /// Unitary spectrum.
    pub spectrum: Vec<Complex64>,
    pub samples: Vec<Complex64>,
}

/// `(conj(h) y) / (|h|^2 + sigma^2)` per bin, then the inverse DFT.
pub fn mmse_equalize(
    y: &[Complex64],
    h_hat: &[Complex64],
    sigma_n2: f64,
    sigma_i2: f64,
    chirp_index: usize,
    valid_until: usize,
) -> Result<Equalized> {
    if chirp_index > valid_until {
        return Err(Error::StaleEstimate {
            valid_until,
            requested: chirp_index,
        });
    }
    if y.len() != h_hat.len() {
        return Err(Error::LengthMismatch {
            expected: h_hat.len(),
            actual: y.len(),
        });
    }
    let reg = sigma_n2 + sigma_i2;
    let spectrum: Vec<Complex64> = y
        .iter()
        .zip(h_hat)
        .map(|(y, h)| {
            let den = h.norm_sqr() + reg;
            if den > 0.0 {
                h.conj() * y / den
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let samples = dsp::ifft_unitary(&spectrum);
    Ok(Equalized { spectrum, samples })
}

/// Uncoded frequency-domain templates of every IM index, kept only on the
/// bins each chirp occupies.
#[derive(Debug, Clone)]
pub struct ImTemplates {
    im: ImIndexSet,
    n: usize,
    /// `(first bin, values)` per IM index; bins wrap modulo `n`.
    spans: Vec<(usize, Vec<Complex64>)>,
    /// Uncoded time-domain chirps, for phase demodulation.
    chirps: Vec<Vec<Complex64>>,
    code_len: usize,
}

impl ImTemplates {
    /// `margin_hz` of spectrum beyond each chirp's nominal edges is kept.
    pub fn new(im: &ImIndexSet, band: &BandPlan, duration_s: f64, code_len: usize, margin_hz: f64) -> Result<Self> {
        if im.is_empty() {
            return Err(Error::Config("empty IM index set".into()));
        }
        let mut spans = Vec::with_capacity(im.len());
        let mut chirps = Vec::with_capacity(im.len());
        let mut n = 0;
        for p in im.pairs() {
            let params = band.chirp(p.center_hz, p.bandwidth_hz, PhaseCode::zeros(code_len, 2), duration_s)?;
            let x = generate_chirp(&params)?.samples;
            n = x.len();
            let spec = dsp::fft_unitary(&x);
            let df = band.sample_rate_hz / n as f64;
            let lo = ((p.center_hz - 0.5 * p.bandwidth_hz - margin_hz) / df).floor() as i64;
            let hi = ((p.center_hz + 0.5 * p.bandwidth_hz + margin_hz) / df).ceil() as i64;
            let width = ((hi - lo + 1) as usize).min(n);
            let first = lo.rem_euclid(n as i64) as usize;
            spans.push((first, (0..width).map(|k| spec[(first + k) % n]).collect()));
            chirps.push(x);
        }
        Ok(Self {
            im: im.clone(),
            n,
            spans,
            chirps,
            code_len,
        })
    }

    pub fn im(&self) -> &ImIndexSet {
        &self.im
    }

    pub fn uncoded_chirp(&self, u: usize) -> &[Complex64] {
        &self.chirps[u]
    }

    pub fn code_len(&self) -> usize {
        self.code_len
    }

    fn correlation(&self, spectrum: &[Complex64], u: usize) -> f64 {
        let (first, vals) = &self.spans[u];
        let n = self.n;
        let mut acc = Complex64::new(0.0, 0.0);
        if first + vals.len() <= n {
            for (a, b) in spectrum[*first..first + vals.len()].iter().zip(vals) {
                acc += a * b.conj();
            }
        } else {
            for (k, b) in vals.iter().enumerate() {
                acc += spectrum[(first + k) % n] * b.conj();
            }
        }
        acc.norm_sqr()
    }
}

/// ML index-modulation decision: the template with the largest correlation
/// magnitude, lowest index on ties.
pub fn demod_im(spectrum: &[Complex64], templates: &ImTemplates) -> Result<usize> {
    if spectrum.len() != templates.n {
        return Err(Error::LengthMismatch {
            expected: templates.n,
            actual: spectrum.len(),
        });
    }
    let mut best = (0, f64::NEG_INFINITY);
    for u in 0..templates.spans.len() {
        let c = templates.correlation(spectrum, u);
        if c > best.1 {
            best = (u, c);
        }
    }
    Ok(best.0)
}

/// Per-segment correlations `A_l = sum_n x[n] conj(c[n])` against the
/// uncoded chirp of the detected IM index.
pub fn segment_correlations(samples: &[Complex64], uncoded: &[Complex64], code_len: usize) -> Result<Vec<Complex64>> {
    let n = samples.len();
    if uncoded.len() != n {
        return Err(Error::LengthMismatch {
            expected: uncoded.len(),
            actual: n,
        });
    }
    if code_len == 0 || !n.is_multiple_of(code_len) {
        return Err(Error::Config(format!("code length {code_len} does not divide {n}")));
    }
    let chip = n / code_len;
    Ok((0..code_len)
        .map(|l| {
            samples[l * chip..(l + 1) * chip]
                .iter()
                .zip(&uncoded[l * chip..(l + 1) * chip])
                .map(|(a, b)| a * b.conj())
                .sum()
        })
        .collect())
}

/// Nearest PSK index to each segment's correlation phase.
pub fn demod_pc(samples: &[Complex64], uncoded: &[Complex64], order: u32, code_len: usize) -> Result<Vec<u32>> {
    let a = segment_correlations(samples, uncoded, code_len)?;
    let m = f64::from(order);
    Ok(a.iter()
        .map(|v| ((v.arg() / (2.0 * PI) * m).round() as i64).rem_euclid(i64::from(order)) as u32)
        .collect())
}

/// How demodulated phases are mapped to codebook rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodePolicy {
    /// Only an exact match is accepted.
    Exact,
    /// Nearest row in `sum (1 - cos dphi)`; erasure when the mean per-chip
    /// distance exceeds the bound.
    Nearest { max_mean_distance: f64 },
}

impl Default for DecodePolicy {
    /// Plain minimum-distance decoding. The per-chip distance never exceeds
    /// 2, so nothing is erased.
    fn default() -> Self {
        DecodePolicy::Nearest { max_mean_distance: 2.0 }
    }
}

/// Index of the decoded codebook row, `None` on erasure.
pub fn decode_phase(phi_hat: &[u32], rows: &[PhaseCode], policy: DecodePolicy) -> Option<usize> {
    match policy {
        DecodePolicy::Exact => rows.iter().position(|r| r.indices() == phi_hat),
        DecodePolicy::Nearest { max_mean_distance } => {
            let (g, d) = nearest_phase(phi_hat, rows)?;
            (d / phi_hat.len().max(1) as f64 <= max_mean_distance).then_some(g)
        }
    }
}

/// Row closest to `phi_hat` in summed `1 - cos` distance, with that distance.
pub fn nearest_phase(phi_hat: &[u32], rows: &[PhaseCode]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (g, r) in rows.iter().enumerate() {
        let step = 2.0 * PI / f64::from(r.order());
        let d: f64 = r
            .indices()
            .iter()
            .zip(phi_hat)
            .map(|(a, b)| 1.0 - ((f64::from(*a) - f64::from(*b)) * step).cos())
            .sum();
        if best.is_none_or(|b| d < b.1) {
            best = Some((g, d));
        }
    }
    best
}

/// Demodulation of one chirp in one polarization.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodResult {
    pub im_index: usize,
    pub b_hat: f64,
    pub f_hat: f64,
    pub phi_hat: Vec<u32>,
    /// Decoded combined-codebook entry, `None` on erasure.
    pub entry: Option<u64>,
    /// Closest entry regardless of the decode policy.
    pub nearest: u64,
}

/// Receiver-side knowledge of the transmit alphabet.
#[derive(Debug, Clone)]
pub struct Demodulator<'a> {
    pub templates: &'a ImTemplates,
    pub codebook: CombinedCodebook,
    pub order: u32,
    pub policy: DecodePolicy,
    /// Bit label of each entry as understood by this receiver.
    pub labels: EntryLabels,
}

impl Demodulator<'_> {
    pub fn demodulate(&self, eq: &Equalized) -> Result<DemodResult> {
        let u = demod_im(&eq.spectrum, self.templates)?;
        let phi_hat = demod_pc(&eq.samples, self.templates.uncoded_chirp(u), self.order, self.templates.code_len())?;
        let g = decode_phase(&phi_hat, &self.codebook.phase, self.policy);
        let (near, _) = nearest_phase(&phi_hat, &self.codebook.phase)
            .ok_or_else(|| Error::Config("empty phase codebook".into()))?;
        let p = self.templates.im().pairs()[u];
        Ok(DemodResult {
            im_index: u,
            b_hat: p.bandwidth_hz,
            f_hat: p.center_hz,
            phi_hat,
            entry: g.map(|g| self.codebook.join(u, g)),
            nearest: self.codebook.join(u, near),
        })
    }

    /// Bits read from the nearest entry. An entry this receiver has no
    /// label for reads as the all-zero word.
    pub fn bits(&self, result: &DemodResult) -> Vec<bool> {
        let w = self.codebook.bit_width();
        self.labels
            .label(result.nearest)
            .and_then(|l| self.codebook.decode_entry(l).ok())
            .unwrap_or_else(|| vec![false; w])
    }
}

/// Bijection between entries and bit labels.
#[derive(Debug, Clone, PartialEq)]
pub enum EntryLabels {
    /// Entry `e` carries the label `e`.
    Identity,
    /// Guessed labelling: `label = perm[e]` for entries with a label.
    Permuted(Vec<u64>),
}

impl EntryLabels {
    /// Random labelling of the `2^w` labelled entries among `size`.
    pub fn random(size: u64, bit_width: usize, seed: u64) -> Self {
        let mut perm: Vec<u64> = (0..size).collect();
        perm.shuffle(&mut SeedStream::new(seed).rng_for("entry-labels", 0));
        Self::Permuted(perm.into_iter().map(|p| if p >> bit_width == 0 { p } else { u64::MAX }).collect())
    }

    pub fn label(&self, entry: u64) -> Option<u64> {
        match self {
            EntryLabels::Identity => Some(entry),
            EntryLabels::Permuted(p) => p.get(entry as usize).copied().filter(|&v| v != u64::MAX),
        }
    }
}

/// Bit- and block-level error counts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkCounter {
    pub bit_errors: u64,
    pub bits: u64,
    pub block_errors: u64,
    pub blocks: u64,
    pub im_errors: u64,
    pub im_symbols: u64,
}

impl LinkCounter {
    pub fn merge(&mut self, other: &LinkCounter) {
        self.bit_errors += other.bit_errors;
        self.bits += other.bits;
        self.block_errors += other.block_errors;
        self.blocks += other.blocks;
        self.im_errors += other.im_errors;
        self.im_symbols += other.im_symbols;
    }

    pub fn ber(&self) -> f64 {
        ratio(self.bit_errors, self.bits)
    }

    pub fn per(&self) -> f64 {
        ratio(self.block_errors, self.blocks)
    }

    pub fn im_ser(&self) -> f64 {
        ratio(self.im_errors, self.im_symbols)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Scores one block (both polarizations of one chirp interval) against the
/// transmitted bits. A block is wrong if either polarization decodes
/// wrongly; an erased polarization counts all its bits as wrong.
pub fn score_block(
    rx: &Demodulator<'_>,
    results: [&DemodResult; 2],
    truth_bits: &[bool],
    truth_im: [usize; 2],
    counter: &mut LinkCounter,
) {
    let w = truth_bits.len() / 2;
    let mut block_ok = true;
    for (p, res) in results.iter().enumerate() {
        let truth = &truth_bits[p * w..(p + 1) * w];
        counter.bits += w as u64;
        counter.im_symbols += 1;
        if res.im_index != truth_im[p] {
            counter.im_errors += 1;
        }
        let bits = rx.bits(res);
        let errs = bits.iter().zip(truth).filter(|(a, b)| a != b).count() as u64;
        counter.bit_errors += errs;
        block_ok &= errs == 0 && res.entry.is_some();
    }
    counter.blocks += 1;
    if !block_ok {
        counter.block_errors += 1;
    }
}

/// Link-level summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMetrics {
    pub ber: f64,
    pub per: f64,
    pub throughput_bps: f64,
    pub gap_bps: f64,
}

/// `(1 - PER) * bits / T_c` for the user, and the gap to the eavesdropper
/// using `bits_per_block` for both.
pub fn link_metrics(user: &LinkCounter, eve: &LinkCounter, bits_per_block: f64, chirp_duration_s: f64) -> LinkMetrics {
    let per = user.per();
    LinkMetrics {
        ber: user.ber(),
        per,
        throughput_bps: (1.0 - per) * bits_per_block / chirp_duration_s,
        gap_bps: (eve.per() - per) * bits_per_block / chirp_duration_s,
    }
}
