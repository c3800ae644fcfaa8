//! Range ambiguity functions, sidelobe metrics and the reference-AF library.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};

/// Magnitude of the circular autocorrelation of one chirp.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeAf {
    values: Vec<f64>,
    peak_index: usize,
}

impl RangeAf {
    /// Wraps precomputed values; negative entries are rejected.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("empty ambiguity function".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain("ambiguity values must be non-negative".into()));
        }
        Ok(Self::from_values_unchecked(values))
    }

    pub(crate) fn from_values_unchecked(values: Vec<f64>) -> Self {
        let peak_index = argmax(&values);
        Self { values, peak_index }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn peak_index(&self) -> usize {
        self.peak_index
    }

    pub fn peak(&self) -> f64 {
        self.values[self.peak_index]
    }

    /// Divided by the zero-lag value (unit peak for constant-modulus input).
    pub fn normalized(&self) -> RangeAf {
        let z = self.values[0];
        if z <= 0.0 {
            return self.clone();
        }
        Self::from_values_unchecked(self.values.iter().map(|v| v / z).collect())
    }

    /// Squared Euclidean distance to another AF of equal length.
    pub fn distance_sq(&self, other: &RangeAf) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// `|IDFT(|DFT x|^2)|`, scaled so that `values[0] = sum |x|^2`.
pub fn range_af(x: &[Complex64]) -> RangeAf {
    let mut spec = dsp::fft(x);
    spec.iter_mut().for_each(|v| *v = Complex64::new(v.norm_sqr(), 0.0));
    dsp::ifft_in_place(&mut spec);
    RangeAf::from_values_unchecked(spec.iter().map(|v| v.norm()).collect())
}

/// Direct `O(N^2)` circular autocorrelation; reference for [`range_af`].
pub fn range_af_direct(x: &[Complex64]) -> RangeAf {
    let n = x.len();
    let values = (0..n)
        .map(|k| {
            (0..n)
                .map(|i| x[i] * x[(i + n - k) % n].conj())
                .sum::<Complex64>()
                .norm()
        })
        .collect();
    RangeAf::from_values_unchecked(values)
}

/// First local minimum of an AF walking outward from lag 0.
pub fn mainlobe_bound(af: &RangeAf) -> usize {
    let v = af.values();
    let half = v.len() / 2;
    for k in 1..half.max(2) {
        if k + 1 >= v.len() || v[k] <= v[k + 1] {
            return k;
        }
    }
    1
}

/// ISL, PSL and the mainlobe bound used to compute them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidelobeMetrics {
    pub isl: f64,
    pub psl: f64,
    pub mainlobe_bound_kt: usize,
}

/// Mean per-lag energy of an ensemble of peak-normalized AFs.
fn mean_energy(afs: &[RangeAf], k_t: usize) -> Result<Vec<f64>> {
    let first = afs
        .first()
        .ok_or_else(|| Error::Domain("empty AF ensemble".into()))?;
    let n = first.len();
    if k_t < 1 || 2 * k_t >= n {
        return Err(Error::Domain(format!("mainlobe bound {k_t} outside [1, {})", n.div_ceil(2))));
    }
    let mut acc = vec![0.0; n];
    for af in afs {
        if af.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: af.len(),
            });
        }
        let norm = af.normalized();
        for (a, v) in acc.iter_mut().zip(norm.values()) {
            *a += v * v;
        }
    }
    let scale = 1.0 / afs.len() as f64;
    // exact mirror symmetry keeps lobe boundaries independent of rounding
    let sym: Vec<f64> = (0..n).map(|k| 0.5 * scale * (acc[k] + acc[(n - k) % n])).collect();
    Ok(sym)
}

fn mainlobe_energy(e: &[f64], k_t: usize) -> f64 {
    let n = e.len();
    e[0] + (1..=k_t).map(|k| e[k] + e[n - k]).sum::<f64>()
}

/// Integrated sidelobe level over an ensemble (a single AF is fine).
pub fn isl(afs: &[RangeAf], k_t: usize) -> Result<f64> {
    let e = mean_energy(afs, k_t)?;
    let main = mainlobe_energy(&e, k_t);
    let total: f64 = e.iter().sum();
    Ok(if main > 0.0 { (total - main).max(0.0) / main } else { 0.0 })
}

/// Peak sidelobe level: energy of the strongest contiguous sidelobe lobe
/// relative to the mainlobe energy.
pub fn psl(afs: &[RangeAf], k_t: usize) -> Result<f64> {
    let e = mean_energy(afs, k_t)?;
    let n = e.len();
    let main = mainlobe_energy(&e, k_t);
    let (lo, hi) = (k_t + 1, n - k_t - 1);
    if lo > hi || main <= 0.0 {
        return Ok(0.0);
    }
    let mut peak = lo;
    for k in lo..=hi {
        if e[k] > e[peak] {
            peak = k;
        }
    }
    if e[peak] <= 0.0 {
        return Ok(0.0);
    }
    let mut left = peak;
    let tol = 1.0 + 1e-9;
    while left > lo && e[left - 1] <= e[left] * tol && e[left - 1] > 0.0 {
        left -= 1;
    }
    let mut right = peak;
    while right < hi && e[right + 1] <= e[right] * tol && e[right + 1] > 0.0 {
        right += 1;
    }
    Ok(e[left..=right].iter().sum::<f64>() / main)
}

pub fn sidelobe_metrics(afs: &[RangeAf], k_t: usize) -> Result<SidelobeMetrics> {
    Ok(SidelobeMetrics {
        isl: isl(afs, k_t)?,
        psl: psl(afs, k_t)?,
        mainlobe_bound_kt: k_t,
    })
}

/// Profile of an engineered sidelobe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GhostShape {
    /// Flat plateau.
    #[default]
    Rectangular,
    /// The nominal mainlobe scaled to the ghost amplitude.
    MainlobeReplica,
}

/// One engineered sidelobe: a symmetric pair of lobes at `+-offset`,
/// `2 * half_width + 1` bins wide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ghost {
    pub offset: usize,
    pub amplitude: f64,
    pub half_width: usize,
    pub shape: GhostShape,
}

impl Ghost {
    pub fn rectangular(offset: usize, amplitude: f64, half_width: usize) -> Self {
        Self {
            offset,
            amplitude,
            half_width,
            shape: GhostShape::Rectangular,
        }
    }

    pub fn replica(offset: usize, amplitude: f64, half_width: usize) -> Self {
        Self {
            offset,
            amplitude,
            half_width,
            shape: GhostShape::MainlobeReplica,
        }
    }
}

/// Templates the codebook designer matches codeword AFs against.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceAfLibrary {
    refs: Vec<RangeAf>,
    ghosts: Vec<Vec<Ghost>>,
}

impl ReferenceAfLibrary {
    /// Builds templates from the nominal chirp AF by raising the listed
    /// ghost plateaus. Each template keeps the nominal values elsewhere.
    pub fn from_ghosts(nominal: &RangeAf, ghosts: Vec<Vec<Ghost>>) -> Result<Self> {
        if ghosts.is_empty() {
            return Err(Error::Config("library needs at least one template".into()));
        }
        let base = nominal.normalized();
        let n = base.len();
        let k_t = mainlobe_bound(&base);
        let mut refs = Vec::with_capacity(ghosts.len());
        for (z, set) in ghosts.iter().enumerate() {
            let b = base.values();
            let mut v: Vec<f64> = (0..n).map(|k| 0.5 * (b[k] + b[(n - k) % n])).collect();
            for g in set {
                if !(g.amplitude >= 0.0 && g.amplitude < 1.0) {
                    return Err(Error::Domain(format!("ghost amplitude {} outside [0, 1)", g.amplitude)));
                }
                if g.offset + g.half_width >= n / 2 {
                    return Err(Error::Domain(format!("ghost offset {} beyond Ns/2", g.offset)));
                }
                if g.offset < g.half_width + k_t + 1 {
                    return Err(Error::Config(format!(
                        "template {z}: ghost at {} overlaps the mainlobe (k_t = {k_t})",
                        g.offset
                    )));
                }
                for k in g.offset - g.half_width..=g.offset + g.half_width {
                    let level = match g.shape {
                        GhostShape::Rectangular => g.amplitude,
                        GhostShape::MainlobeReplica => g.amplitude * b[k.abs_diff(g.offset)],
                    };
                    v[k] = v[k].max(level);
                    v[n - k] = v[n - k].max(level);
                }
            }
            refs.push(RangeAf::from_values_unchecked(v));
        }
        Ok(Self { refs, ghosts })
    }

    /// One ghost of amplitude `rho` per template at the given offsets,
    /// each as wide as the nominal mainlobe.
    pub fn new(nominal: &RangeAf, offsets: &[usize], rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!("rho = {rho} outside (0, 1)")));
        }
        let half_width = mainlobe_bound(&nominal.normalized()) - 1;
        let ghosts = offsets
            .iter()
            .map(|&offset| vec![Ghost::rectangular(offset, rho, half_width)])
            .collect();
        Self::from_ghosts(nominal, ghosts)
    }

    /// `count` templates; template `z` carries a mainlobe-shaped ghost of
    /// amplitude `rho` at lag `first_offset + z` and a weaker one of
    /// amplitude `harmonic` at twice that lag (0 disables it).
    pub fn ladder(nominal: &RangeAf, first_offset: usize, count: usize, rho: f64, harmonic: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Domain(format!("rho = {rho} outside (0, 1)")));
        }
        let ghosts = (0..count)
            .map(|z| {
                let o = first_offset + z;
                let mut set = vec![Ghost::replica(o, rho, 1)];
                if harmonic > 0.0 {
                    set.push(Ghost::replica(2 * o, harmonic, 1));
                }
                set
            })
            .collect();
        Self::from_ghosts(nominal, ghosts)
    }

    /// Lags (at the library's sample spacing) of the strongest ghost of
    /// each template.
    pub fn primary_offsets(&self) -> Vec<usize> {
        self.ghosts
            .iter()
            .map(|set| {
                set.iter()
                    .max_by(|a, b| a.amplitude.total_cmp(&b.amplitude))
                    .map_or(0, |g| g.offset)
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    pub fn templates(&self) -> &[RangeAf] {
        &self.refs
    }

    pub fn ghosts(&self) -> &[Vec<Ghost>] {
        &self.ghosts
    }

    pub fn num_samples(&self) -> usize {
        self.refs[0].len()
    }

    /// Index and squared distance of the nearest template to a normalized AF.
    pub fn nearest(&self, af: &RangeAf) -> Result<(usize, f64)> {
        let mut best = (0, f64::INFINITY);
        for (k, t) in self.refs.iter().enumerate() {
            let d = af.distance_sq(t)?;
            if d < best.1 {
                best = (k, d);
            }
        }
        Ok(best)
    }

    /// CSV with columns `template,bin,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("template,bin,value\n");
        for (z, t) in self.refs.iter().enumerate() {
            for (k, v) in t.values().iter().enumerate() {
                let _ = writeln!(out, "{z},{k},{v:.9e}");
            }
        }
        out
    }
}
