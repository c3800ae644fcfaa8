//! Legitimate sensing receiver: regularized inverse filtering, oversampled
//! range mapping, hop-phase correction, slow-time Doppler processing,
//! CA-CFAR detection and target-parameter estimation.
//!
//! The CFAR detector and the estimator are shared with [`crate::eve_rx`].

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::channel::{hop_phase, HopReference, RadarScene, TargetSpec, SPEED_OF_LIGHT};
use crate::dsp;
use crate::error::{Error, Result};
use crate::waveform::ChirpParams;

/// Uniform range grid starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeGrid {
    spacing_m: f64,
    n_points: usize,
    oversample: usize,
    sample_rate_hz: f64,
}

impl RangeGrid {
    /// Grid of spacing `c / (2 fs oversample)` covering `[0, max_range_m]`.
    pub fn new(max_range_m: f64, sample_rate_hz: f64, oversample: usize) -> Result<Self> {
        if oversample == 0 || !(sample_rate_hz > 0.0) || !(max_range_m >= 0.0) {
            return Err(Error::Config("range grid needs positive rate, oversample and range".into()));
        }
        let spacing_m = SPEED_OF_LIGHT / (2.0 * sample_rate_hz * oversample as f64);
        Ok(Self {
            spacing_m,
            n_points: (max_range_m / spacing_m + 1e-9).floor() as usize + 1,
            oversample,
            sample_rate_hz,
        })
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    pub fn range(&self, m: usize) -> f64 {
        m as f64 * self.spacing_m
    }

    pub fn ranges(&self) -> Vec<f64> {
        (0..self.n_points).map(|m| self.range(m)).collect()
    }

    /// `2 r_m / c`.
    pub fn delay(&self, m: usize) -> f64 {
        2.0 * self.range(m) / SPEED_OF_LIGHT
    }

    /// Checks that every grid delay falls inside an `ns`-sample chirp and
    /// within half of it, where circular wrap would alias.
    pub fn check_fits(&self, ns: usize) -> Result<()> {
        let max_delay = self.delay(self.n_points.saturating_sub(1));
        if max_delay >= 0.5 * ns as f64 / self.sample_rate_hz {
            return Err(Error::Config(format!(
                "range grid reaches {:.1} m, beyond half the chirp window",
                self.range(self.n_points - 1)
            )));
        }
        Ok(())
    }
}

/// `IDFT(R X* / (|X|^2 + eta max|X|^2))`.
pub fn inverse_filter(r: &[Complex64], x: &[Complex64], eta: f64) -> Result<Vec<Complex64>> {
    if r.len() != x.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: r.len(),
        });
    }
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("regularization eta = {eta} must be positive")));
    }
    let xs = dsp::fft(x);
    let peak = xs.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::Domain("transmit chirp is all zero".into()));
    }
    let lambda = eta * peak;
    let mut rs = dsp::fft(r);
    for (rv, xv) in rs.iter_mut().zip(&xs) {
        *rv = *rv * xv.conj() / (xv.norm_sqr() + lambda);
    }
    dsp::ifft_in_place(&mut rs);
    Ok(rs)
}

/// Band-limited interpolation of a fast-time response onto the grid
/// (zero-padded inverse DFT by the oversample factor).
pub fn range_response(y_hat: &[Complex64], grid: &RangeGrid) -> Vec<Complex64> {
    let n = y_hat.len();
    let os = grid.oversample();
    let spec = dsp::fft(y_hat);
    let big = n * os;
    let mut padded = vec![Complex64::new(0.0, 0.0); big];
    let pos = n.div_ceil(2);
    padded[..pos].copy_from_slice(&spec[..pos]);
    let neg = n - pos;
    padded[big - neg..].copy_from_slice(&spec[pos..]);
    if n.is_multiple_of(2) && os > 1 {
        // split the Nyquist bin between both ends
        let nyq = spec[n / 2] * 0.5;
        padded[big - neg] = nyq;
        padded[n / 2] = nyq;
    }
    dsp::ifft_in_place(&mut padded);
    let scale = os as f64;
    (0..grid.len())
        .map(|m| padded.get(m).copied().unwrap_or_default() * scale)
        .collect()
}

/// Multiplies each range cell by `exp(-j phi_err(tau_m))`.
pub fn hop_phase_correction(
    response: &[Complex64],
    delta_f_hz: f64,
    delta_s_hz_per_s: f64,
    grid: &RangeGrid,
) -> Vec<Complex64> {
    response
        .iter()
        .enumerate()
        .map(|(m, v)| v * Complex64::from_polar(1.0, -hop_phase(delta_f_hz, delta_s_hz_per_s, grid.delay(m))))
        .collect()
}

/// Range-Doppler map stored range-major; Doppler bins in DFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    cells: Vec<Complex64>,
    n_range: usize,
    n_doppler: usize,
    grid: RangeGrid,
    pri_s: f64,
    wavelength_m: f64,
}

impl RangeDopplerMap {
    /// Builds a map directly from cells (range-major).
    pub fn from_cells(
        cells: Vec<Complex64>,
        n_doppler: usize,
        grid: RangeGrid,
        pri_s: f64,
        wavelength_m: f64,
    ) -> Result<Self> {
        if n_doppler == 0 || cells.len() != grid.len() * n_doppler {
            return Err(Error::LengthMismatch {
                expected: grid.len() * n_doppler,
                actual: cells.len(),
            });
        }
        Ok(Self {
            n_range: grid.len(),
            cells,
            n_doppler,
            grid,
            pri_s,
            wavelength_m,
        })
    }

    pub fn n_range(&self) -> usize {
        self.n_range
    }

    pub fn n_doppler(&self) -> usize {
        self.n_doppler
    }

    pub fn grid(&self) -> &RangeGrid {
        &self.grid
    }

    pub fn cell(&self, m: usize, l: usize) -> Complex64 {
        self.cells[m * self.n_doppler + l]
    }

    pub fn power(&self, m: usize, l: usize) -> f64 {
        self.cell(m, l).norm_sqr()
    }

    /// `1 / (N_c T_r)`.
    pub fn doppler_bin_hz(&self) -> f64 {
        1.0 / (self.n_doppler as f64 * self.pri_s)
    }

    /// Velocity of a (possibly fractional) signed Doppler bin.
    pub fn velocity(&self, signed_bin: f64) -> f64 {
        signed_bin * self.wavelength_m / (2.0 * self.n_doppler as f64 * self.pri_s)
    }

    pub fn velocity_of_bin(&self, l: usize) -> f64 {
        self.velocity(dsp::signed_bin(l, self.n_doppler) as f64)
    }

    /// Doppler slice at range cell `m` (DFT order).
    pub fn doppler_slice(&self, m: usize) -> &[Complex64] {
        &self.cells[m * self.n_doppler..(m + 1) * self.n_doppler]
    }

    /// Cell with the largest magnitude.
    pub fn peak(&self) -> (usize, usize) {
        let i = (0..self.cells.len())
            .max_by(|&a, &b| self.cells[a].norm_sqr().total_cmp(&self.cells[b].norm_sqr()))
            .unwrap_or(0);
        (i / self.n_doppler, i % self.n_doppler)
    }

    /// CSV with columns `range_m,velocity_mps,magnitude_db`, velocity
    /// ascending within each range.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("range_m,velocity_mps,magnitude_db\n");
        let nc = self.n_doppler;
        for m in 0..self.n_range {
            for s in 0..nc {
                let l = (s + nc / 2) % nc;
                let db = 10.0 * self.power(m, l).max(1e-300).log10();
                let _ = writeln!(out, "{:.4},{:.4},{:.3}", self.grid.range(m), self.velocity_of_bin(l), db);
            }
        }
        out
    }
}

/// Slow-time DFT across chirps for every range cell. `rows[i]` is chirp
/// `i`'s range response.
pub fn doppler_fft(rows: &[Vec<Complex64>], grid: &RangeGrid, pri_s: f64, wavelength_m: f64) -> Result<RangeDopplerMap> {
    let nc = rows.len();
    if nc < 2 {
        return Err(Error::Config("Doppler processing needs at least two chirps".into()));
    }
    let nr = grid.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != nr) {
        return Err(Error::LengthMismatch {
            expected: nr,
            actual: bad.len(),
        });
    }
    let mut cells = vec![Complex64::new(0.0, 0.0); nr * nc];
    let mut col = vec![Complex64::new(0.0, 0.0); nc];
    for m in 0..nr {
        for (i, row) in rows.iter().enumerate() {
            col[i] = row[m];
        }
        dsp::fft_in_place(&mut col);
        cells[m * nc..(m + 1) * nc].copy_from_slice(&col);
    }
    RangeDopplerMap::from_cells(cells, nc, grid.clone(), pri_s, wavelength_m)
}

/// Cell-averaging CFAR window and false-alarm rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfarConfig {
    pub pfa: f64,
    /// Guard cells (range, Doppler) on each side.
    pub guard: (usize, usize),
    /// Training cells (range, Doppler) on each side beyond the guard.
    pub train: (usize, usize),
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self {
            pfa: 1e-6,
            guard: (2, 2),
            train: (8, 4),
        }
    }
}

impl CfarConfig {
    pub fn training_cells(&self) -> usize {
        let outer = (2 * (self.guard.0 + self.train.0) + 1) * (2 * (self.guard.1 + self.train.1) + 1);
        let inner = (2 * self.guard.0 + 1) * (2 * self.guard.1 + 1);
        outer - inner
    }

    /// `N_t (pfa^(-1/N_t) - 1)`.
    pub fn threshold_factor(&self) -> f64 {
        let nt = self.training_cells() as f64;
        nt * (self.pfa.powf(-1.0 / nt) - 1.0)
    }
}

/// A CFAR detection after peak interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub magnitude: f64,
    pub range_bin: usize,
    pub doppler_bin: usize,
}

/// Summed-area table over a power map whose Doppler axis is extended
/// circularly by `pad` on both sides.
struct Integral {
    width: usize,
    table: Vec<f64>,
    pad: usize,
}

impl Integral {
    fn new(map: &RangeDopplerMap, pad: usize) -> Self {
        let nr = map.n_range();
        let nc = map.n_doppler();
        let width = nc + 2 * pad;
        let mut table = vec![0.0; (nr + 1) * (width + 1)];
        for m in 0..nr {
            let mut row = 0.0;
            for c in 0..width {
                let l = (c + nc * (pad / nc + 1) - pad) % nc;
                row += map.power(m, l);
                table[(m + 1) * (width + 1) + c + 1] = table[m * (width + 1) + c + 1] + row;
            }
        }
        Self { width, table, pad }
    }

    /// Sum over range `[m0, m1]` and Doppler `[l - h, l + h]` (circular).
    fn sum(&self, m0: usize, m1: usize, l: usize, h: usize) -> f64 {
        let w = self.width + 1;
        let c0 = l + self.pad - h;
        let c1 = l + self.pad + h + 1;
        self.table[(m1 + 1) * w + c1] - self.table[m0 * w + c1] - self.table[(m1 + 1) * w + c0]
            + self.table[m0 * w + c0]
    }
}

/// Cells that exceed the CA-CFAR threshold, before peak merging.
pub fn cfar_mask(map: &RangeDopplerMap, cfg: &CfarConfig) -> Result<Vec<bool>> {
    let (gr, gd) = cfg.guard;
    let (tr, td) = cfg.train;
    let (nr, nc) = (map.n_range(), map.n_doppler());
    if nr < 2 * (gr + tr) + 1 || nc < 2 * (gd + td) + 1 {
        return Err(Error::Config(format!(
            "map {nr}x{nc} smaller than the CFAR window {}x{}",
            2 * (gr + tr) + 1,
            2 * (gd + td) + 1
        )));
    }
    if !(cfg.pfa > 0.0 && cfg.pfa < 1.0) {
        return Err(Error::Domain(format!("pfa = {} outside (0, 1)", cfg.pfa)));
    }
    let alpha = cfg.threshold_factor();
    let nt = cfg.training_cells() as f64;
    let integral = Integral::new(map, gd + td);
    let mut mask = vec![false; nr * nc];
    for m in gr + tr..nr - gr - tr {
        for l in 0..nc {
            let outer = integral.sum(m - gr - tr, m + gr + tr, l, gd + td);
            let inner = integral.sum(m - gr, m + gr, l, gd);
            let noise = (outer - inner) / nt;
            mask[m * nc + l] = map.power(m, l) > alpha * noise;
        }
    }
    Ok(mask)
}

/// 2-D CA-CFAR on `|D|^2`; detections are merged to local maxima within
/// the guard neighbourhood and refined by parabolic interpolation.
pub fn ca_cfar(map: &RangeDopplerMap, cfg: &CfarConfig) -> Result<Vec<Detection>> {
    let mask = cfar_mask(map, cfg)?;
    let (gr, gd) = cfg.guard;
    let (nr, nc) = (map.n_range(), map.n_doppler());
    let mut out = Vec::new();
    for m in 0..nr {
        for l in 0..nc {
            if !mask[m * nc + l] {
                continue;
            }
            let p = map.power(m, l);
            let mut is_peak = true;
            'scan: for dm in -(gr as i64)..=gr as i64 {
                let mm = m as i64 + dm;
                if mm < 0 || mm >= nr as i64 {
                    continue;
                }
                for dl in -(gd as i64)..=gd as i64 {
                    if dm == 0 && dl == 0 {
                        continue;
                    }
                    let ll = (l as i64 + dl).rem_euclid(nc as i64) as usize;
                    let q = map.power(mm as usize, ll);
                    // earlier cells win ties
                    let earlier = (mm as usize, ll) < (m, l);
                    if q > p || (earlier && q == p) {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                out.push(refine(map, m, l));
            }
        }
    }
    Ok(out)
}

/// 1-D CA-CFAR along a power profile (non-circular). Returns the indices of
/// threshold crossings that are local maxima within the guard window.
pub fn ca_cfar_1d(power: &[f64], guard: usize, train: usize, pfa: f64) -> Result<Vec<usize>> {
    let n = power.len();
    if train == 0 || n < 2 * (guard + train) + 1 {
        return Err(Error::Config(format!(
            "profile of {n} cells cannot hold a CFAR window of {}",
            2 * (guard + train) + 1
        )));
    }
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::Domain(format!("pfa = {pfa} outside (0, 1)")));
    }
    let nt = (2 * train) as f64;
    let alpha = nt * (pfa.powf(-1.0 / nt) - 1.0);
    let mut prefix = vec![0.0; n + 1];
    for (i, p) in power.iter().enumerate() {
        prefix[i + 1] = prefix[i] + p;
    }
    let w = guard + train;
    let mut out = Vec::new();
    for m in w..n - w {
        let left = prefix[m - guard] - prefix[m - w];
        let right = prefix[m + w + 1] - prefix[m + guard + 1];
        if power[m] <= alpha * (left + right) / nt {
            continue;
        }
        let lo = m - guard;
        let hi = m + guard;
        let peak = (lo..=hi).all(|k| k == m || power[k] < power[m] || (power[k] == power[m] && k > m));
        if peak {
            out.push(m);
        }
    }
    Ok(out)
}

fn refine(map: &RangeDopplerMap, m: usize, l: usize) -> Detection {
    let nc = map.n_doppler();
    let mag = |mm: usize, ll: usize| map.cell(mm, ll).norm();
    let centre = mag(m, l);
    let dr = if m > 0 && m + 1 < map.n_range() {
        dsp::parabolic_offset(mag(m - 1, l), centre, mag(m + 1, l))
    } else {
        0.0
    };
    let dd = dsp::parabolic_offset(mag(m, (l + nc - 1) % nc), centre, mag(m, (l + 1) % nc));
    Detection {
        range_m: (m as f64 + dr) * map.grid().spacing_m(),
        velocity_mps: map.velocity(dsp::signed_bin(l, nc) as f64 + dd),
        magnitude: centre,
        range_bin: m,
        doppler_bin: l,
    }
}

/// Per-trial error caps applied to missed or wildly wrong estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCaps {
    pub range_m: f64,
    pub velocity_mps: f64,
}

impl Default for ErrorCaps {
    fn default() -> Self {
        Self {
            range_m: 50.0,
            velocity_mps: 31.25,
        }
    }
}

/// Detection associated with a target: nearest in range, strongest on ties.
pub fn associate<'a>(detections: &'a [Detection], target: &TargetSpec) -> Option<&'a Detection> {
    detections.iter().min_by(|a, b| {
        let da = (a.range_m - target.range_m).abs();
        let db = (b.range_m - target.range_m).abs();
        da.total_cmp(&db).then(b.magnitude.total_cmp(&a.magnitude))
    })
}

/// Capped absolute errors `(range, velocity)` of one target in one trial.
pub fn target_errors(detections: &[Detection], target: &TargetSpec, caps: &ErrorCaps) -> (f64, f64) {
    match associate(detections, target) {
        Some(d) => (
            (d.range_m - target.range_m).abs().min(caps.range_m),
            (d.velocity_mps - target.velocity_mps).abs().min(caps.velocity_mps),
        ),
        None => (caps.range_m, caps.velocity_mps),
    }
}

/// Root-mean-square estimation errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rmse {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub trials: usize,
}

/// Running sum of squared capped errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorAccumulator {
    sum_r2: f64,
    sum_v2: f64,
    count: usize,
}

impl ErrorAccumulator {
    pub fn add(&mut self, range_err: f64, velocity_err: f64) {
        self.sum_r2 += range_err * range_err;
        self.sum_v2 += velocity_err * velocity_err;
        self.count += 1;
    }

    pub fn add_trial(&mut self, detections: &[Detection], target: &TargetSpec, caps: &ErrorCaps) {
        let (r, v) = target_errors(detections, target, caps);
        self.add(r, v);
    }

    pub fn merge(&mut self, other: &ErrorAccumulator) {
        self.sum_r2 += other.sum_r2;
        self.sum_v2 += other.sum_v2;
        self.count += other.count;
    }

    pub fn rmse(&self) -> Rmse {
        if self.count == 0 {
            return Rmse::default();
        }
        let n = self.count as f64;
        Rmse {
            range_m: (self.sum_r2 / n).sqrt(),
            velocity_mps: (self.sum_v2 / n).sqrt(),
            trials: self.count,
        }
    }
}

/// RMSE over trials and all targets of the scene.
pub fn estimate_targets(trials: &[Vec<Detection>], truth: &RadarScene, caps: &ErrorCaps) -> Result<Rmse> {
    if truth.targets.is_empty() {
        return Err(Error::Config("estimation needs at least one true target".into()));
    }
    let mut acc = ErrorAccumulator::default();
    for dets in trials {
        for t in &truth.targets {
            acc.add_trial(dets, t, caps);
        }
    }
    Ok(acc.rmse())
}

/// Transform work executed by a receiver, in `n log2 n` units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransformCost {
    pub fast_time: f64,
    pub slow_time: f64,
}

pub(crate) fn nlogn(n: usize) -> f64 {
    let n = n as f64;
    n * n.log2().max(1.0)
}

/// Legitimate ISAC receiver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LegitimateReceiver {
    pub grid: RangeGrid,
    pub eta: f64,
    pub hop_reference: HopReference,
    /// Disable to observe the uncompensated hop phase.
    pub correct_hops: bool,
}

impl LegitimateReceiver {
    pub fn new(grid: RangeGrid, hop_reference: HopReference) -> Self {
        Self {
            grid,
            eta: 0.02,
            hop_reference,
            correct_hops: true,
        }
    }

    /// Fast-time stages for one chirp: inverse filter, range mapping and
    /// hop correction.
    pub fn range_profile(&self, echo: &[Complex64], tx: &[Complex64], params: &ChirpParams) -> Result<Vec<Complex64>> {
        let y = inverse_filter(echo, tx, self.eta)?;
        let r = range_response(&y, &self.grid);
        if self.correct_hops {
            let (df, ds) = self.hop_reference.offsets(params);
            Ok(hop_phase_correction(&r, df, ds, &self.grid))
        } else {
            Ok(r)
        }
    }

    /// Full chain over `N_c` chirps; `tx[i]` are the exact transmit samples
    /// and parameters of chirp `i`.
    pub fn process(
        &self,
        echoes: &[Vec<Complex64>],
        tx: &[crate::waveform::ChirpSamples],
        pri_s: f64,
        wavelength_m: f64,
    ) -> Result<(RangeDopplerMap, TransformCost)> {
        if tx.len() < echoes.len() {
            return Err(Error::LengthMismatch {
                expected: echoes.len(),
                actual: tx.len(),
            });
        }
        let ns = echoes.first().map_or(0, Vec::len);
        self.grid.check_fits(ns)?;
        let rows: Vec<Vec<Complex64>> = echoes
            .iter()
            .zip(tx)
            .map(|(r, x)| self.range_profile(r, &x.samples, &x.params))
            .collect::<Result<_>>()?;
        let cost = TransformCost {
            // three Ns-point transforms plus the oversampled inverse
            fast_time: echoes.len() as f64 * (3.0 * nlogn(ns) + nlogn(ns * self.grid.oversample())),
            slow_time: self.grid.len() as f64 * nlogn(echoes.len()),
        };
        Ok((doppler_fft(&rows, &self.grid, pri_s, wavelength_m)?, cost))
    }
}

/// Phase of `v` in `(-pi, pi]`.
pub fn wrapped_phase(v: f64) -> f64 {
    let w = (v + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{generate_chirp, BandPlan, PhaseCode};

    fn chirp() -> Vec<Complex64> {
        let p = BandPlan::default().chirp(0.0, 50e6, PhaseCode::zeros(40, 256), 20e-6).unwrap();
        generate_chirp(&p).unwrap().samples
    }

    #[test]
    fn inverse_filter_identity_and_delay() {
        let x = chirp();
        let y = inverse_filter(&x, &x, 1e-9).unwrap();
        assert!(y[0].norm() > 0.99);
        let rest: f64 = y[1..].iter().map(|v| v.norm_sqr()).sum();
        assert!(rest < 0.01);

        let n = x.len();
        let delayed: Vec<Complex64> = (0..n).map(|i| x[(i + n - 100) % n]).collect();
        let y = inverse_filter(&delayed, &x, 0.02).unwrap();
        let peak = (0..n).max_by(|&a, &b| y[a].norm().total_cmp(&y[b].norm())).unwrap();
        assert_eq!(peak, 100);
    }

    #[test]
    fn inverse_filter_errors() {
        let x = chirp();
        let zero = vec![Complex64::new(0.0, 0.0); x.len()];
        assert!(inverse_filter(&x, &zero, 0.02).is_err());
        assert!(inverse_filter(&x, &x, 0.0).is_err());
        assert!(inverse_filter(&x[..10], &x, 0.02).is_err());
    }

    #[test]
    fn range_response_basics() {
        let grid = RangeGrid::new(300.0, 100e6, 4).unwrap();
        assert_eq!(grid.len(), 801);
        assert!((grid.spacing_m() - 0.374740573).abs() < 1e-6);
        let mut d = vec![Complex64::new(0.0, 0.0); 2000];
        d[37] = Complex64::new(1.0, 0.0);
        let r = range_response(&d, &grid);
        let peak = (0..r.len()).max_by(|&a, &b| r[a].norm().total_cmp(&r[b].norm())).unwrap();
        assert!((grid.range(peak) - 37.0 * SPEED_OF_LIGHT / 2e8).abs() <= grid.spacing_m());
        assert!((r[148] - Complex64::new(1.0, 0.0)).norm() < 1e-9);

        let zero = vec![Complex64::new(0.0, 0.0); 2000];
        assert!(range_response(&zero, &grid).iter().all(|v| v.norm() == 0.0));

        let one = RangeGrid::new(0.0, 100e6, 4).unwrap();
        let y: Vec<Complex64> = (0..2000).map(|i| Complex64::new(i as f64, 1.0)).collect();
        assert!((range_response(&y, &one)[0] - y[0]).norm() < 1e-6);
    }

    #[test]
    fn hop_correction_closed_form() {
        let grid = RangeGrid::new(300.0, 100e6, 4).unwrap();
        let v = vec![Complex64::new(1.0, 0.0); grid.len()];
        assert_eq!(hop_phase_correction(&v, 0.0, 0.0, &grid), v);
        let out = hop_phase_correction(&v, 1e6, 0.0, &grid);
        let m = (150.0 / grid.spacing_m()).round() as usize;
        let expected = 2.0 * PI * 1e6 * grid.delay(m);
        assert!((expected - 2.0 * PI).abs() < 0.01);
        assert!((wrapped_phase(out[m].arg() - expected)).abs() < 1e-9);
    }

    #[test]
    fn doppler_bin_of_fifteen_mps() {
        let grid = RangeGrid::new(3.0, 100e6, 4).unwrap();
        let lambda = SPEED_OF_LIGHT / 2.4e9;
        let nu = 2.0 * 15.0 / lambda;
        let rows: Vec<Vec<Complex64>> = (0..64)
            .map(|i| vec![Complex64::from_polar(1.0, 2.0 * PI * nu * i as f64 * 1e-3); grid.len()])
            .collect();
        let map = doppler_fft(&rows, &grid, 1e-3, lambda).unwrap();
        let (_, l) = map.peak();
        assert_eq!(l, (nu * 0.064).round() as usize);
        assert!((map.velocity_of_bin(l) - 15.0).abs() < map.velocity(1.0));

        let still: Vec<Vec<Complex64>> = vec![vec![Complex64::new(1.0, 0.0); grid.len()]; 8];
        assert_eq!(doppler_fft(&still, &grid, 1e-3, lambda).unwrap().peak().1, 0);
        assert!(doppler_fft(&still[..1], &grid, 1e-3, lambda).is_err());
    }

    fn point_map(nr: usize, nc: usize, m: usize, l: usize) -> RangeDopplerMap {
        let grid = RangeGrid::new((nr - 1) as f64 * SPEED_OF_LIGHT / 8e8, 100e6, 4).unwrap();
        assert_eq!(grid.len(), nr);
        let mut cells = vec![Complex64::new(0.0, 0.0); nr * nc];
        cells[m * nc + l] = Complex64::new(10.0, 0.0);
        RangeDopplerMap::from_cells(cells, nc, grid, 1e-3, 0.125).unwrap()
    }

    #[test]
    fn cfar_single_point() {
        let map = point_map(100, 32, 40, 5);
        let det = ca_cfar(&map, &CfarConfig::default()).unwrap();
        assert_eq!(det.len(), 1);
        assert_eq!((det[0].range_bin, det[0].doppler_bin), (40, 5));
    }

    #[test]
    fn cfar_1d_finds_isolated_peaks() {
        let mut p = vec![1.0; 200];
        p[50] = 1e4;
        p[51] = 5e3;
        p[120] = 1e4;
        assert_eq!(ca_cfar_1d(&p, 2, 8, 1e-6).unwrap(), vec![50, 120]);
        assert!(ca_cfar_1d(&p[..10], 2, 8, 1e-6).is_err());
        assert!(ca_cfar_1d(&p, 2, 8, 1.0).is_err());
        assert!(ca_cfar_1d(&vec![1.0; 200], 2, 8, 1e-6).unwrap().is_empty());
    }

    #[test]
    fn cfar_window_too_large() {
        let map = point_map(10, 32, 5, 5);
        assert!(ca_cfar(&map, &CfarConfig::default()).is_err());
        let map = point_map(100, 8, 5, 5);
        assert!(ca_cfar(&map, &CfarConfig::default()).is_err());
    }

    #[test]
    fn threshold_factor_matches_formula() {
        let cfg = CfarConfig::default();
        assert_eq!(cfg.training_cells(), 21 * 13 - 25);
        let nt = 248.0_f64;
        assert!((cfg.threshold_factor() - nt * (1e-6f64.powf(-1.0 / nt) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn estimation_semantics() {
        let scene = RadarScene::three_targets(20.0);
        let perfect: Vec<Detection> = scene
            .targets
            .iter()
            .map(|t| Detection {
                range_m: t.range_m,
                velocity_mps: t.velocity_mps,
                magnitude: 1.0,
                range_bin: 0,
                doppler_bin: 0,
            })
            .collect();
        let caps = ErrorCaps::default();
        let r = estimate_targets(&[perfect], &scene, &caps).unwrap();
        assert_eq!((r.range_m, r.velocity_mps), (0.0, 0.0));
        let r = estimate_targets(&[vec![]], &scene, &caps).unwrap();
        assert_eq!((r.range_m, r.velocity_mps), (50.0, 31.25));
        let empty = RadarScene {
            targets: vec![],
            ..scene
        };
        assert!(estimate_targets(&[vec![]], &empty, &caps).is_err());
    }

    #[test]
    fn association_prefers_strongest_on_ties() {
        let t = TargetSpec::new(100.0, 0.0);
        let mk = |r: f64, mag: f64| Detection {
            range_m: r,
            velocity_mps: 0.0,
            magnitude: mag,
            range_bin: 0,
            doppler_bin: 0,
        };
        let dets = [mk(99.0, 1.0), mk(101.0, 5.0), mk(130.0, 50.0)];
        assert_eq!(associate(&dets, &t).unwrap().magnitude, 5.0);
    }
}
