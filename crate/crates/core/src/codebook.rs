//! Index-modulation enumeration, AF-constrained phase codebook design,
//! the combined (IM x phase) codebook and throughput bounds.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::ambiguity::{range_af, ReferenceAfLibrary};
use crate::dsp;
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::waveform::{generate_chirp, near_integer, BandPlan, ChirpParams, PhaseCode};

/// One `(center, bandwidth)` grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImIndex {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
}

/// All admissible IM indices of a band plan, ordered by bandwidth then
/// centre frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ImIndexSet {
    pairs: Vec<ImIndex>,
}

impl ImIndexSet {
    pub fn pairs(&self) -> &[ImIndex] {
        &self.pairs
    }

    /// `U`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, u: usize) -> Option<ImIndex> {
        self.pairs.get(u).copied()
    }

    /// Position of an exact grid point.
    pub fn position(&self, idx: ImIndex) -> Option<usize> {
        self.pairs.iter().position(|p| {
            (p.center_hz - idx.center_hz).abs() < 1.0 && (p.bandwidth_hz - idx.bandwidth_hz).abs() < 1.0
        })
    }
}

/// Every `(f, b)` with `b` on the bandwidth grid and `[f - b/2, f + b/2]`
/// inside the allocated band, `f` stepping from the lower band edge.
pub fn enumerate_im_indices(band: &BandPlan) -> Result<ImIndexSet> {
    band.validate()?;
    let (lo, _) = band.edges();
    let n_bw = ((band.bw_max_hz - band.bw_min_hz) / band.step_hz).round() as usize;
    let mut pairs = Vec::new();
    for kb in 0..=n_bw {
        let b = band.bw_min_hz + kb as f64 * band.step_hz;
        let spare = (band.allocated_band_hz - b) / band.step_hz;
        let n_f = (spare + 1e-9).floor() as usize;
        for kf in 0..=n_f {
            let f = lo + 0.5 * b + kf as f64 * band.step_hz;
            pairs.push(ImIndex {
                center_hz: f,
                bandwidth_hz: b,
            });
        }
    }
    if pairs.is_empty() {
        return Err(Error::Config("band plan admits no IM index".into()));
    }
    Ok(ImIndexSet { pairs })
}

/// Upper bound on PSK phases per chip that keep the AF deviation within
/// `eps`: `ceil(M / pi * asin(4 eps)) + 1`.
pub fn admissible_phases_per_chip(order: u32, eps: f64) -> Result<u64> {
    if !(eps >= 0.0 && 4.0 * eps <= 1.0) {
        return Err(Error::Domain(format!("4 * eps = {} outside [0, 1]", 4.0 * eps)));
    }
    let x = f64::from(order) / PI * (4.0 * eps).asin();
    // guard against asin rounding pushing an exact integer up by one ulp
    let c = if near_integer(x) { x.round() } else { x.ceil() };
    Ok(c as u64 + 1)
}

/// Signalling scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Index modulation with unconstrained random phase codes.
    ImPcFmcw,
    /// Index modulation with the AF-constrained secure codebook.
    SecFmcw,
}

/// Parameters of the throughput bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputParams {
    pub im_size: u64,
    pub library_size: u64,
    pub order: u32,
    pub code_len: usize,
    pub epsilon: f64,
    pub chirp_duration_s: f64,
}

/// `log2` of the per-polarization codebook size of a scheme.
pub fn log2_codebook_size(scheme: Scheme, p: &ThroughputParams) -> Result<f64> {
    if p.im_size == 0 || p.order == 0 {
        return Err(Error::Domain("codebook dimensions must be positive".into()));
    }
    let u = (p.im_size as f64).log2();
    Ok(match scheme {
        Scheme::ImPcFmcw => u + p.code_len as f64 * f64::from(p.order).log2(),
        Scheme::SecFmcw => {
            if p.library_size == 0 {
                return Err(Error::Domain("library size must be positive".into()));
            }
            let adm = admissible_phases_per_chip(p.order, p.epsilon)?;
            u + (p.library_size as f64).log2() + p.code_len as f64 * (adm as f64).log2()
        }
    })
}

/// Bits per chirp interval over both polarizations, `floor(2 log2 S)`.
pub fn bits_per_chirp(scheme: Scheme, p: &ThroughputParams) -> Result<u64> {
    Ok((2.0 * log2_codebook_size(scheme, p)? + 1e-9).floor() as u64)
}

/// Maximum throughput in bit/s.
pub fn max_throughput(scheme: Scheme, p: &ThroughputParams) -> Result<f64> {
    if !(p.chirp_duration_s > 0.0) {
        return Err(Error::Domain("chirp duration must be positive".into()));
    }
    Ok(bits_per_chirp(scheme, p)? as f64 / p.chirp_duration_s)
}

/// `(pe_eve - pe_u) * floor(2 log2 S) / T_c`, with `S` given by its log2.
pub fn throughput_gap(pe_u: f64, pe_eve: f64, log2_size: f64, chirp_duration_s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pe_u) || !(0.0..=1.0).contains(&pe_eve) {
        return Err(Error::Domain("error rates must lie in [0, 1]".into()));
    }
    let bits = (2.0 * log2_size + 1e-9).floor();
    Ok((pe_eve - pe_u) * bits / chirp_duration_s)
}

/// Designed phase codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCodebook {
    pub rows: Vec<PhaseCode>,
    /// Nearest template per codeword.
    pub assigned_ref: Vec<usize>,
    /// Squared AF mismatch per codeword.
    pub mismatch: Vec<f64>,
    pub epsilon: f64,
    pub order: u32,
    pub library_size: usize,
    pub seed: u64,
}

impl PhaseCodebook {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn code_len(&self) -> usize {
        self.rows.first().map_or(0, PhaseCode::len)
    }

    pub fn objective(&self) -> f64 {
        self.mismatch.iter().sum()
    }

    /// Scores externally supplied rows against a library.
    pub fn from_rows(
        rows: Vec<PhaseCode>,
        library: &ReferenceAfLibrary,
        anchor: &ChirpParams,
        epsilon: f64,
        seed: u64,
    ) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Config("codebook has no rows".into()))?;
        let order = first.order();
        let mut assigned_ref = Vec::with_capacity(rows.len());
        let mut mismatch = Vec::with_capacity(rows.len());
        for r in &rows {
            let (k, j) = codeword_mismatch(r, library, anchor)?;
            assigned_ref.push(k);
            mismatch.push(j);
        }
        Ok(Self {
            rows,
            assigned_ref,
            mismatch,
            epsilon,
            order,
            library_size: library.len(),
            seed,
        })
    }

    /// Plain-text layout: `key value` header lines followed by one row of
    /// `L` space-separated phase indices per codeword.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# secfmcw phase codebook\n");
        let _ = writeln!(out, "M {}", self.order);
        let _ = writeln!(out, "L {}", self.code_len());
        let _ = writeln!(out, "G {}", self.len());
        let _ = writeln!(out, "eps {}", self.epsilon);
        let _ = writeln!(out, "Z {}", self.library_size);
        let _ = writeln!(out, "seed {}", self.seed);
        for r in &self.rows {
            let line: Vec<String> = r.indices().iter().map(u32::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Header of a codebook file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodebookHeader {
    pub order: u32,
    pub code_len: usize,
    pub size: usize,
    pub epsilon: f64,
    pub library_size: usize,
    pub seed: u64,
}

/// Parses the layout written by [`PhaseCodebook::to_text`].
pub fn parse_codebook_text(text: &str) -> Result<(CodebookHeader, Vec<PhaseCode>)> {
    let mut fields: [Option<String>; 6] = Default::default();
    const KEYS: [&str; 6] = ["M", "L", "G", "eps", "Z", "seed"];
    let mut rows_raw = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap_or_default();
        if let Some(i) = KEYS.iter().position(|k| *k == head) {
            let v = parts.next().ok_or(Error::Parse {
                line: no + 1,
                msg: format!("missing value for {head}"),
            })?;
            fields[i] = Some(v.to_string());
        } else {
            rows_raw.push((no + 1, line.to_string()));
        }
    }
    fn get<T: std::str::FromStr>(f: &Option<String>, key: &str) -> Result<T> {
        f.as_deref()
            .ok_or_else(|| Error::Parse { line: 0, msg: format!("missing header {key}") })?
            .parse()
            .map_err(|_| Error::Parse { line: 0, msg: format!("bad value for {key}") })
    }
    let header = CodebookHeader {
        order: get(&fields[0], "M")?,
        code_len: get(&fields[1], "L")?,
        size: get(&fields[2], "G")?,
        epsilon: get(&fields[3], "eps")?,
        library_size: get(&fields[4], "Z")?,
        seed: get(&fields[5], "seed")?,
    };
    let mut rows = Vec::with_capacity(rows_raw.len());
    for (line, raw) in rows_raw {
        let idx: Vec<u32> = raw
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse { line, msg: "non-integer phase index".into() })?;
        if idx.len() != header.code_len {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} indices, found {}", header.code_len, idx.len()),
            });
        }
        rows.push(PhaseCode::new(idx, header.order).map_err(|e| Error::Parse { line, msg: e.to_string() })?);
    }
    if rows.len() != header.size {
        return Err(Error::Parse {
            line: 0,
            msg: format!("header says G = {}, found {} rows", header.size, rows.len()),
        });
    }
    Ok((header, rows))
}

/// Nearest template and squared mismatch of the anchor chirp coded with
/// `code`. The AF is normalized to unit zero-lag value.
pub fn codeword_mismatch(
    code: &PhaseCode,
    library: &ReferenceAfLibrary,
    anchor: &ChirpParams,
) -> Result<(usize, f64)> {
    let x = generate_chirp(&anchor.with_code(code.clone())?)?;
    let af = range_af(&x.samples).normalized();
    library.nearest(&af)
}

/// Inputs of the coordinate-descent designer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignConfig {
    /// `G`.
    pub size: usize,
    pub epsilon: f64,
    pub order: u32,
    pub code_len: usize,
    /// Sweep limit `Lambda`.
    pub max_sweeps: usize,
    pub seed: u64,
}

/// Result of a design run, feasible or not.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignOutcome {
    pub codebook: PhaseCodebook,
    /// Total objective before the first sweep and after every sweep.
    pub objective_trace: Vec<f64>,
    /// Sweeps that changed at least one chip.
    pub sweeps_with_change: usize,
    /// Codewords still above `eps`.
    pub infeasible: Vec<usize>,
}

/// Incremental range-AF evaluator for one anchor chirp.
///
/// Changing the phase of chip `l` by `d = e^{j dphi} - 1` perturbs the
/// spectrum by `d * S_l`, so the autocorrelation of every candidate follows
/// from one inverse FFT per chip update instead of one per candidate.
struct AfEngine {
    n: usize,
    half: usize,
    code_len: usize,
    base: Vec<Complex64>,
    /// Spectrum of the anchor restricted to each chip.
    chip_spectra: Vec<Vec<Complex64>>,
    /// Autocorrelation of each chip segment, lags `0..=n/2`.
    chip_acf: Vec<Vec<f64>>,
    /// Templates on lags `0..=n/2`, times lag multiplicity.
    templates: Vec<Vec<f64>>,
    template_energy: Vec<f64>,
    weights: Vec<f64>,
}

impl AfEngine {
    fn new(anchor: &ChirpParams, code_len: usize, library: &ReferenceAfLibrary) -> Result<Self> {
        let plain = anchor.with_code(PhaseCode::zeros(code_len, 1))?;
        let base = generate_chirp(&plain)?.samples;
        let n = base.len();
        if library.num_samples() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: library.num_samples(),
            });
        }
        let half = n / 2;
        let chip = n / code_len;
        let mut chip_spectra = Vec::with_capacity(code_len);
        let mut chip_acf = Vec::with_capacity(code_len);
        for l in 0..code_len {
            let mut seg = vec![Complex64::new(0.0, 0.0); n];
            seg[l * chip..(l + 1) * chip].copy_from_slice(&base[l * chip..(l + 1) * chip]);
            let spec = dsp::fft(&seg);
            let mut pow: Vec<Complex64> = spec.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect();
            dsp::ifft_in_place(&mut pow);
            chip_acf.push(pow[..=half].iter().map(|v| v.re).collect());
            chip_spectra.push(spec);
        }
        let weights: Vec<f64> = (0..=half)
            .map(|k| if k == 0 || (n % 2 == 0 && k == half) { 1.0 } else { 2.0 })
            .collect();
        let mut templates = Vec::with_capacity(library.len());
        let mut template_energy = Vec::with_capacity(library.len());
        for t in library.templates() {
            let v = &t.values()[..=half];
            template_energy.push(v.iter().zip(&weights).map(|(a, w)| w * a * a).sum());
            templates.push(v.iter().zip(&weights).map(|(a, w)| w * a).collect());
        }
        Ok(Self {
            n,
            half,
            code_len,
            base,
            chip_spectra,
            chip_acf,
            templates,
            template_energy,
            weights,
        })
    }

    fn samples(&self, code: &[u32], order: u32) -> Vec<Complex64> {
        let chip = self.n / self.code_len;
        let step = 2.0 * PI / f64::from(order);
        self.base
            .iter()
            .enumerate()
            .map(|(i, b)| b * Complex64::from_polar(1.0, step * f64::from(code[i / chip])))
            .collect()
    }

    /// Nearest template and mismatch of normalized AF magnitudes on lags
    /// `0..=n/2`.
    fn score(&self, psi: &[f64]) -> (usize, f64) {
        let e: f64 = psi.iter().zip(&self.weights).map(|(p, w)| w * p * p).sum();
        let mut best = (0, f64::INFINITY);
        for (z, (t, te)) in self.templates.iter().zip(&self.template_energy).enumerate() {
            let cross: f64 = psi.iter().zip(t).map(|(p, q)| p * q).sum();
            let j = (e - 2.0 * cross + te).max(0.0);
            if j < best.1 {
                best = (z, j);
            }
        }
        best
    }

    fn evaluate(&self, code: &[u32], order: u32) -> (usize, f64) {
        let x = self.samples(code, order);
        let af = range_af(&x);
        let z = af.values()[0];
        let psi: Vec<f64> = af.values()[..=self.half].iter().map(|v| v / z).collect();
        self.score(&psi)
    }
}

/// Working state of one codeword during descent.
struct CodewordState {
    spectrum: Vec<Complex64>,
    acf: Vec<Complex64>,
}

impl CodewordState {
    fn new(engine: &AfEngine, code: &[u32], order: u32) -> Self {
        let spectrum = dsp::fft(&engine.samples(code, order));
        let mut acf: Vec<Complex64> = spectrum.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect();
        dsp::ifft_in_place(&mut acf);
        Self { spectrum, acf }
    }
}

/// Coordinate-descent designer; see [`design_phase_codebook`].
pub struct CodebookDesigner<'a> {
    library: &'a ReferenceAfLibrary,
    anchor: &'a ChirpParams,
    cfg: DesignConfig,
    engine: AfEngine,
    /// Chip comparisons made by the distinctness checks.
    pub distinctness_ops: u64,
}

impl<'a> CodebookDesigner<'a> {
    pub fn new(cfg: DesignConfig, library: &'a ReferenceAfLibrary, anchor: &'a ChirpParams) -> Result<Self> {
        if cfg.size == 0 {
            return Err(Error::Config("codebook size must be positive".into()));
        }
        if !(cfg.epsilon > 0.0) {
            return Err(Error::Domain("eps must be positive".into()));
        }
        if cfg.order < 2 {
            return Err(Error::Config("PSK order must be at least 2".into()));
        }
        let adm = admissible_phases_per_chip(cfg.order, cfg.epsilon)?;
        let log2_bound = (library.len() as f64).log2() + cfg.code_len as f64 * (adm as f64).log2();
        let log2_pool = cfg.code_len as f64 * f64::from(cfg.order).log2();
        if (cfg.size as f64).log2() > log2_bound.min(log2_pool) + 1e-12 {
            return Err(Error::CodebookTooLarge {
                requested: cfg.size,
                bound: format!("2^{:.3}", log2_bound.min(log2_pool)),
            });
        }
        let engine = AfEngine::new(anchor, cfg.code_len, library)?;
        Ok(Self {
            library,
            anchor,
            cfg,
            engine,
            distinctness_ops: 0,
        })
    }

    /// Sinusoidal phase pattern whose AF best matches template `z`.
    ///
    /// A sinusoidal code of frequency `f_m` on a chirp of slope `S` puts
    /// paired sidelobes at lags `+-f_m / S`; the modulation index is picked
    /// from a grid.
    fn nominal_pattern(&self, z: usize, theta: f64) -> Vec<u32> {
        let l_len = self.cfg.code_len;
        let order = self.cfg.order;
        let Some(ghost) = self.library.ghosts()[z].first().copied() else {
            return vec![0; l_len];
        };
        let fs = self.anchor.sample_rate_hz;
        let tc = self.anchor.duration_s;
        let fm = self.anchor.slope() * ghost.offset as f64 / fs;
        let pattern = |beta: f64| -> Vec<u32> {
            (0..l_len)
                .map(|l| {
                    let t = (l as f64 + 0.5) * tc / l_len as f64;
                    let phi = beta * (2.0 * PI * fm * t + theta).sin();
                    let m = (phi / (2.0 * PI) * f64::from(order)).round() as i64;
                    m.rem_euclid(i64::from(order)) as u32
                })
                .collect()
        };
        let mut best = (vec![0; l_len], f64::INFINITY);
        for step in 0..=60 {
            let cand = pattern(0.05 * step as f64);
            let (k, j) = self.engine.evaluate(&cand, order);
            if k == z && j < best.1 {
                best = (cand, j);
            }
        }
        best.0
    }

    fn initial_codes(&self) -> Vec<Vec<u32>> {
        let g = self.cfg.size;
        let z = self.library.len();
        let order = self.cfg.order;
        // codewords sharing a template get evenly spaced global rotations;
        // with fewer codewords than templates every codeword gets its own
        let classes = if g > z { g.div_ceil(z) } else { g };
        let class_of = |i: usize| if g > z { i / z } else { i };
        let mut rng = SeedStream::new(self.cfg.seed).rng_for("codebook-init", 0);
        let mut codes: Vec<Vec<u32>> = Vec::with_capacity(g);
        for i in 0..g {
            let rot = ((class_of(i) as u64 * u64::from(order)) / classes as u64) as u32 % order;
            // modulation start phase spread by the golden ratio
            let theta = 2.0 * PI * (i as f64 * 0.618_033_988_749_895).fract();
            let pattern = self.nominal_pattern(i % z, theta);
            let mut code: Vec<u32> = pattern.iter().map(|m| (m + rot) % order).collect();
            // random single-chip perturbations, kept only when they lower J
            let (_, mut j) = self.engine.evaluate(&code, order);
            if j > self.cfg.epsilon {
                for _ in 0..4 * self.cfg.code_len {
                    let l = rng.random_range(0..self.cfg.code_len);
                    let old = code[l];
                    code[l] = rng.random_range(0..order);
                    let (_, jn) = self.engine.evaluate(&code, order);
                    if jn < j && !codes.contains(&code) {
                        j = jn;
                    } else {
                        code[l] = old;
                    }
                }
            }
            // enforce distinctness of the start point
            while codes.contains(&code) {
                let l = rng.random_range(0..self.cfg.code_len);
                code[l] = rng.random_range(0..order);
            }
            codes.push(code);
        }
        codes
    }

    /// Candidate phases at chip `l` that would make codeword `i` equal to
    /// another codeword.
    fn blocked(&mut self, codes: &[Vec<u32>], i: usize, l: usize) -> Vec<u32> {
        let mut out = Vec::new();
        for (j, other) in codes.iter().enumerate() {
            if j == i {
                continue;
            }
            let mut same = true;
            for (k, (a, b)) in codes[i].iter().zip(other).enumerate() {
                self.distinctness_ops += 1;
                if k != l && a != b {
                    same = false;
                    break;
                }
            }
            if same {
                out.push(other[l]);
            }
        }
        out
    }

    /// Runs the descent; the outcome may contain infeasible codewords.
    pub fn run(&mut self) -> Result<DesignOutcome> {
        let order = self.cfg.order;
        let n = self.engine.n;
        let half = self.engine.half;
        let mut codes = self.initial_codes();
        let mut states: Vec<CodewordState> =
            codes.iter().map(|c| CodewordState::new(&self.engine, c, order)).collect();
        let mut scores: Vec<(usize, f64)> = codes.iter().map(|c| self.engine.evaluate(c, order)).collect();
        let mut trace = vec![scores.iter().map(|s| s.1).sum::<f64>()];
        let phasors: Vec<Complex64> = (0..order)
            .map(|m| Complex64::from_polar(1.0, 2.0 * PI * f64::from(m) / f64::from(order)))
            .collect();
        let mut sweeps_with_change = 0;
        let mut a = vec![Complex64::new(0.0, 0.0); n];
        let mut psi = vec![0.0; half + 1];

        for _sweep in 0..self.cfg.max_sweeps {
            let mut changed = false;
            for i in 0..codes.len() {
                for l in 0..self.engine.code_len {
                    let blocked = self.blocked(&codes, i, l);
                    let old = codes[i][l];
                    let st = &states[i];
                    // A = IFFT(S_l conj(X)), S_l = e^{j phi_old} C_l
                    let rot = phasors[old as usize];
                    for ((dst, c), x) in a.iter_mut().zip(&self.engine.chip_spectra[l]).zip(&st.spectrum) {
                        *dst = rot * c * x.conj();
                    }
                    dsp::ifft_in_place(&mut a);
                    let acf_l = &self.engine.chip_acf[l];
                    let current = scores[i];
                    let limit = self.cfg.epsilon.max(current.1);
                    let mut best: Option<(u32, usize, f64)> = None;
                    for cand in 0..order {
                        if blocked.contains(&cand) {
                            continue;
                        }
                        let (z, j) = if cand == old {
                            current
                        } else {
                            let d = phasors[((cand + order - old) % order) as usize] - 1.0;
                            let d2 = d.norm_sqr();
                            let dc = d.conj();
                            let r0 = st.acf[0] + d * a[0] + dc * a[0].conj() + d2 * acf_l[0];
                            let norm = 1.0 / r0.re;
                            psi[0] = 1.0;
                            for k in 1..=half {
                                let r = st.acf[k] + d * a[k] + dc * a[n - k].conj() + d2 * acf_l[k];
                                psi[k] = r.norm() * norm;
                            }
                            self.engine.score(&psi)
                        };
                        if j <= limit && best.is_none_or(|b| j < b.2) {
                            best = Some((cand, z, j));
                        }
                    }
                    if let Some((cand, z, j)) = best {
                        if cand != old && j < current.1 {
                            codes[i][l] = cand;
                            states[i] = CodewordState::new(&self.engine, &codes[i], order);
                            scores[i] = (z, j);
                            changed = true;
                        }
                    }
                }
            }
            trace.push(scores.iter().map(|s| s.1).sum());
            if !changed {
                break;
            }
            sweeps_with_change += 1;
        }

        let rows: Vec<PhaseCode> = codes
            .into_iter()
            .map(|c| PhaseCode::new(c, order))
            .collect::<Result<_>>()?;
        let infeasible: Vec<usize> = scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.1 > self.cfg.epsilon)
            .map(|(i, _)| i)
            .collect();
        Ok(DesignOutcome {
            codebook: PhaseCodebook {
                rows,
                assigned_ref: scores.iter().map(|s| s.0).collect(),
                mismatch: scores.iter().map(|s| s.1).collect(),
                epsilon: self.cfg.epsilon,
                order,
                library_size: self.library.len(),
                seed: self.cfg.seed,
            },
            objective_trace: trace,
            sweeps_with_change,
            infeasible,
        })
    }
}

/// Designs `G` distinct `L`-chip M-PSK codes whose range AFs lie within
/// `eps` of the library. Fails with [`Error::Infeasible`] when some
/// codeword is still above `eps` after `max_sweeps` sweeps.
pub fn design_phase_codebook(
    cfg: DesignConfig,
    library: &ReferenceAfLibrary,
    anchor: &ChirpParams,
) -> Result<DesignOutcome> {
    let outcome = CodebookDesigner::new(cfg, library, anchor)?.run()?;
    if outcome.infeasible.is_empty() {
        Ok(outcome)
    } else {
        Err(Error::Infeasible {
            sweeps: outcome.objective_trace.len() - 1,
            indices: outcome.infeasible,
        })
    }
}

/// Findings of [`validate_codebook`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    /// Chip comparisons made by the pairwise distinctness check.
    pub distinctness_ops: u64,
    pub max_mismatch: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks alphabet membership, the mismatch bound and pairwise
/// distinctness from scratch, independently of the designer's bookkeeping.
pub fn validate_codebook(
    cb: &PhaseCodebook,
    library: &ReferenceAfLibrary,
    anchor: &ChirpParams,
) -> Result<ValidationReport> {
    let mut violations = Vec::new();
    let mut max_mismatch: f64 = 0.0;
    for (i, row) in cb.rows.iter().enumerate() {
        if row.order() != cb.order || row.indices().iter().any(|&m| m >= cb.order) {
            violations.push(format!("codeword {i} leaves the {}-PSK alphabet", cb.order));
        }
        let (_, j) = codeword_mismatch(row, library, anchor)?;
        max_mismatch = max_mismatch.max(j);
        if j > cb.epsilon * (1.0 + 1e-9) {
            violations.push(format!("codeword {i} mismatch {j:.4} exceeds eps {}", cb.epsilon));
        }
    }
    let mut ops = 0u64;
    for i in 0..cb.rows.len() {
        for j in i + 1..cb.rows.len() {
            let (a, b) = (cb.rows[i].indices(), cb.rows[j].indices());
            let mut differ = a.len() != b.len();
            for (x, y) in a.iter().zip(b) {
                ops += 1;
                differ |= x != y;
            }
            if !differ {
                violations.push(format!("codewords {i} and {j} are identical"));
            }
        }
    }
    Ok(ValidationReport {
        violations,
        distinctness_ops: ops,
        max_mismatch,
    })
}

/// The transmit alphabet: every IM index combined with every phase code.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedCodebook {
    pub im: ImIndexSet,
    pub phase: Vec<PhaseCode>,
}

impl CombinedCodebook {
    pub fn new(im: ImIndexSet, phase: Vec<PhaseCode>) -> Result<Self> {
        if im.is_empty() || phase.is_empty() {
            return Err(Error::Config("combined codebook needs IM indices and phase codes".into()));
        }
        Ok(Self { im, phase })
    }

    /// `S = U * G`.
    pub fn size(&self) -> u64 {
        self.im.len() as u64 * self.phase.len() as u64
    }

    /// Bits carried per polarization, `floor(log2 S)`.
    pub fn bit_width(&self) -> usize {
        63 - self.size().leading_zeros() as usize
    }

    /// `(IM index, phase-code index)` of an entry.
    pub fn split(&self, entry: u64) -> (usize, usize) {
        let g = self.phase.len() as u64;
        ((entry / g) as usize, (entry % g) as usize)
    }

    pub fn join(&self, im: usize, code: usize) -> u64 {
        im as u64 * self.phase.len() as u64 + code as u64
    }

    /// Waveform of an entry.
    pub fn chirp(&self, entry: u64, band: &BandPlan, duration_s: f64) -> Result<ChirpParams> {
        if entry >= self.size() {
            return Err(Error::Domain(format!("entry {entry} outside codebook of size {}", self.size())));
        }
        let (u, g) = self.split(entry);
        let p = self.im.pairs()[u];
        band.chirp(p.center_hz, p.bandwidth_hz, self.phase[g].clone(), duration_s)
    }

    /// Maps `2 * bit_width` bits (MSB first, V then H) to two entries.
    pub fn encode_bits(&self, bits: &[bool]) -> Result<(u64, u64)> {
        let w = self.bit_width();
        if bits.len() != 2 * w {
            return Err(Error::LengthMismatch {
                expected: 2 * w,
                actual: bits.len(),
            });
        }
        let val = |b: &[bool]| b.iter().fold(0u64, |acc, &x| (acc << 1) | u64::from(x));
        Ok((val(&bits[..w]), val(&bits[w..])))
    }

    /// Bits of one entry (MSB first).
    pub fn decode_entry(&self, entry: u64) -> Result<Vec<bool>> {
        let w = self.bit_width();
        if entry >> w != 0 {
            return Err(Error::Domain(format!("entry {entry} carries no {w}-bit label")));
        }
        Ok((0..w).rev().map(|k| (entry >> k) & 1 == 1).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::Ghost;

    #[test]
    fn im_counts() {
        assert_eq!(enumerate_im_indices(&BandPlan::default()).unwrap().len(), 861);
        let small = BandPlan::new(5.0, 3.0, 5.0, 1.0, 5.0).unwrap();
        assert_eq!(enumerate_im_indices(&small).unwrap().len(), 6);
        let single = BandPlan::new(80e6, 80e6, 80e6, 1e6, 100e6).unwrap();
        let set = enumerate_im_indices(&single).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.pairs()[0].center_hz, 0.0);
    }

    #[test]
    fn admissible_phases() {
        assert_eq!(admissible_phases_per_chip(256, 0.1).unwrap(), 35);
        assert_eq!(admissible_phases_per_chip(256, 0.0).unwrap(), 1);
        assert_eq!(admissible_phases_per_chip(4, 0.1).unwrap(), 2);
        assert!(matches!(admissible_phases_per_chip(4, 0.3), Err(Error::Domain(_))));
    }

    fn reference_params() -> ThroughputParams {
        ThroughputParams {
            im_size: 861,
            library_size: 10,
            order: 256,
            code_len: 40,
            epsilon: 0.1,
            chirp_duration_s: 20e-6,
        }
    }

    #[test]
    fn throughput_bounds() {
        let p = reference_params();
        assert_eq!(bits_per_chirp(Scheme::ImPcFmcw, &p).unwrap(), 659);
        assert_eq!(bits_per_chirp(Scheme::SecFmcw, &p).unwrap(), 436);
        assert!((max_throughput(Scheme::ImPcFmcw, &p).unwrap() - 32.95e6).abs() < 1e-3);
        assert!((max_throughput(Scheme::SecFmcw, &p).unwrap() - 21.8e6).abs() < 1e-3);
        let trivial = ThroughputParams {
            im_size: 1,
            library_size: 1,
            epsilon: 0.0,
            ..p
        };
        assert_eq!(max_throughput(Scheme::SecFmcw, &trivial).unwrap(), 0.0);
    }

    #[test]
    fn gap_values() {
        assert_eq!(throughput_gap(0.3, 0.3, 218.0, 20e-6).unwrap(), 0.0);
        assert!((throughput_gap(0.0, 1.0, 218.0, 20e-6).unwrap() - 21.8e6).abs() < 1e-3);
        assert!(throughput_gap(-0.1, 1.0, 218.0, 20e-6).is_err());
    }

    #[test]
    fn bit_mapping() {
        let im = enumerate_im_indices(&BandPlan::default()).unwrap();
        let cb = CombinedCodebook::new(im, vec![PhaseCode::zeros(40, 256); 64]).unwrap();
        assert_eq!(cb.size(), 861 * 64);
        assert_eq!(cb.bit_width(), 15);
        assert_eq!(cb.encode_bits(&[false; 30]).unwrap(), (0, 0));
        assert!(cb.encode_bits(&[false; 29]).is_err());
        let bits = cb.decode_entry(12345).unwrap();
        let mut both = bits.clone();
        both.extend(cb.decode_entry(7).unwrap());
        assert_eq!(cb.encode_bits(&both).unwrap(), (12345, 7));
        assert!(cb.decode_entry(1 << 15).is_err());
    }

    fn anchor(code_len: usize) -> ChirpParams {
        BandPlan::default()
            .chirp(0.0, 50e6, PhaseCode::zeros(code_len, 256), 20e-6)
            .unwrap()
    }

    fn nominal_af() -> crate::ambiguity::RangeAf {
        range_af(&generate_chirp(&anchor(40)).unwrap().samples)
    }

    #[test]
    fn fixed_point_of_plain_library() {
        let lib = ReferenceAfLibrary::from_ghosts(&nominal_af(), vec![vec![]]).unwrap();
        let cfg = DesignConfig {
            size: 1,
            epsilon: 0.1,
            order: 256,
            code_len: 40,
            max_sweeps: 5,
            seed: 3,
        };
        let out = design_phase_codebook(cfg, &lib, &anchor(40)).unwrap();
        assert_eq!(out.codebook.rows[0], PhaseCode::zeros(40, 256));
        assert!(out.codebook.mismatch[0] < 1e-12);
        assert_eq!(out.sweeps_with_change, 0);
    }

    #[test]
    fn mismatch_self_match_and_order() {
        let a = anchor(40);
        let mut rng = SeedStream::new(1).rng_for("t", 0);
        let code = PhaseCode::random(40, 256, &mut rng);
        let af = range_af(&generate_chirp(&a.with_code(code.clone()).unwrap()).unwrap().samples).normalized();
        let lib = ReferenceAfLibrary::new(&nominal_af(), &[30, 40], 0.3).unwrap();
        let mut ghosts = lib.ghosts().to_vec();
        ghosts.push(vec![]);
        // append the code's own AF as a template by building a library around it
        let own = ReferenceAfLibrary::from_ghosts(&af, vec![vec![]]).unwrap();
        let (k, j) = codeword_mismatch(&code, &own, &a).unwrap();
        assert_eq!(k, 0);
        assert!(j < 1e-20);

        let fwd = ReferenceAfLibrary::new(&nominal_af(), &[30, 40, 50], 0.3).unwrap();
        let rev = ReferenceAfLibrary::new(&nominal_af(), &[50, 40, 30], 0.3).unwrap();
        let (kf, jf) = codeword_mismatch(&code, &fwd, &a).unwrap();
        let (kr, jr) = codeword_mismatch(&code, &rev, &a).unwrap();
        assert_eq!(jf, jr);
        assert_eq!(kf, 2 - kr);
        let scan = fwd
            .templates()
            .iter()
            .map(|t| af.distance_sq(t).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(scan, jf);
    }

    #[test]
    fn engine_matches_direct_scoring() {
        let lib = ReferenceAfLibrary::from_ghosts(
            &nominal_af(),
            vec![vec![Ghost::rectangular(30, 0.3, 1)]],
        )
        .unwrap();
        let a = anchor(40);
        let engine = AfEngine::new(&a, 40, &lib).unwrap();
        let mut rng = SeedStream::new(2).rng_for("t", 0);
        for _ in 0..5 {
            let code = PhaseCode::random(40, 256, &mut rng);
            let (k, j) = engine.evaluate(code.indices(), 256);
            let (k2, j2) = codeword_mismatch(&code, &lib, &a).unwrap();
            assert_eq!(k, k2);
            assert!((j - j2).abs() < 1e-9 * j2.max(1.0));
        }
    }

    #[test]
    fn oversized_codebook_rejected() {
        let lib = ReferenceAfLibrary::new(&nominal_af(), &[30], 0.3).unwrap();
        let cfg = DesignConfig {
            size: 5,
            epsilon: 0.01,
            order: 4,
            code_len: 2,
            max_sweeps: 1,
            seed: 0,
        };
        // admissible(4, 0.01) = 2, bound 1 * 2^2 = 4 < 5
        assert!(matches!(
            CodebookDesigner::new(cfg, &lib, &anchor(2)),
            Err(Error::CodebookTooLarge { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let cb = PhaseCodebook {
            rows: vec![PhaseCode::new(vec![1, 2, 3], 8).unwrap(), PhaseCode::new(vec![7, 0, 5], 8).unwrap()],
            assigned_ref: vec![0, 0],
            mismatch: vec![0.0, 0.0],
            epsilon: 0.1,
            order: 8,
            library_size: 1,
            seed: 42,
        };
        let (h, rows) = parse_codebook_text(&cb.to_text()).unwrap();
        assert_eq!(h.order, 8);
        assert_eq!(h.code_len, 3);
        assert_eq!(h.size, 2);
        assert_eq!(h.seed, 42);
        assert_eq!(rows, cb.rows);
        assert!(parse_codebook_text("M 8\nL 3\nG 1\neps 0.1\nZ 1\nseed 0\n1 2\n").is_err());
        assert!(parse_codebook_text("M 8\nL 3\nG 1\neps 0.1\nZ 1\nseed 0\n1 2 9\n").is_err());
        assert!(parse_codebook_text("M 8\nL 3\n1 2 3\n").is_err());
    }
}
