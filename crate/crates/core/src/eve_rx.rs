//! Sensing eavesdropper: matched filtering against its own noisy copy of
//! the transmission, then the same range mapping, Doppler, CFAR and
//! estimation path as the legitimate receiver.
//!
//! Nothing here takes chirp parameters; the eavesdropper only ever sees
//! sample matrices.

use num_complex::Complex64;

use crate::channel::RadarScene;
use crate::dsp;
use crate::error::{Error, Result};
use crate::radar_rx::{
    ca_cfar, doppler_fft, estimate_targets, nlogn, range_response, CfarConfig, ErrorCaps, RangeDopplerMap,
    RangeGrid, Rmse, TransformCost,
};

/// What the eavesdropper records over one coherent interval.
#[derive(Debug, Clone, PartialEq)]
pub struct EveObservation {
    pub reference: Vec<Vec<Complex64>>,
    pub echoes: Vec<Vec<Complex64>>,
    pub snr_ref_db: f64,
    pub snr_echo_db: f64,
}

impl EveObservation {
    pub fn new(reference: Vec<Vec<Complex64>>, echoes: Vec<Vec<Complex64>>, snr_ref_db: f64, snr_echo_db: f64) -> Result<Self> {
        if reference.len() != echoes.len() {
            return Err(Error::LengthMismatch {
                expected: echoes.len(),
                actual: reference.len(),
            });
        }
        for (r, e) in reference.iter().zip(&echoes) {
            if r.len() != e.len() {
                return Err(Error::LengthMismatch {
                    expected: e.len(),
                    actual: r.len(),
                });
            }
        }
        Ok(Self {
            reference,
            echoes,
            snr_ref_db,
            snr_echo_db,
        })
    }

    pub fn n_chirps(&self) -> usize {
        self.echoes.len()
    }
}

/// Circular cross-correlation `z[k] = sum_n r[n] conj(ref[n - k])`.
pub fn matched_filter(echo: &[Complex64], reference: &[Complex64]) -> Result<Vec<Complex64>> {
    if echo.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: echo.len(),
        });
    }
    Ok(dsp::circular_xcorr(echo, reference))
}

/// Interpolates each chirp's matched-filter output onto the range grid and
/// transforms across chirps.
pub fn eve_doppler(z: &[Vec<Complex64>], grid: &RangeGrid, pri_s: f64, wavelength_m: f64) -> Result<RangeDopplerMap> {
    let rows: Vec<Vec<Complex64>> = z.iter().map(|zi| range_response(zi, grid)).collect();
    doppler_fft(&rows, grid, pri_s, wavelength_m)
}

/// Eavesdropper front end.
#[derive(Debug, Clone, PartialEq)]
pub struct EveReceiver {
    pub grid: RangeGrid,
}

impl EveReceiver {
    pub fn new(grid: RangeGrid) -> Self {
        Self { grid }
    }

    /// Per-chirp matched-filter outputs.
    pub fn compress(&self, obs: &EveObservation) -> Result<Vec<Vec<Complex64>>> {
        obs.echoes
            .iter()
            .zip(&obs.reference)
            .map(|(e, r)| matched_filter(e, r))
            .collect()
    }

    pub fn process(&self, obs: &EveObservation, pri_s: f64, wavelength_m: f64) -> Result<(RangeDopplerMap, TransformCost)> {
        let ns = obs.echoes.first().map_or(0, Vec::len);
        self.grid.check_fits(ns)?;
        let z = self.compress(obs)?;
        let cost = TransformCost {
            fast_time: obs.n_chirps() as f64 * (3.0 * nlogn(ns) + nlogn(ns * self.grid.oversample())),
            slow_time: self.grid.len() as f64 * nlogn(obs.n_chirps()),
        };
        Ok((eve_doppler(&z, &self.grid, pri_s, wavelength_m)?, cost))
    }
}

/// Detection and estimation through the shared CFAR/association path.
pub fn eve_estimate(map: &RangeDopplerMap, truth: &RadarScene, cfar: &CfarConfig, caps: &ErrorCaps) -> Result<Rmse> {
    let det = ca_cfar(map, cfar)?;
    estimate_targets(&[det], truth, caps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::{generate_chirp, BandPlan, PhaseCode};

    fn chirp() -> Vec<Complex64> {
        let p = BandPlan::default().chirp(5e6, 40e6, PhaseCode::zeros(40, 256), 20e-6).unwrap();
        generate_chirp(&p).unwrap().samples
    }

    #[test]
    fn self_correlation_peak() {
        let x = chirp();
        let z = matched_filter(&x, &x).unwrap();
        let peak = (0..z.len()).max_by(|&a, &b| z[a].norm().total_cmp(&z[b].norm())).unwrap();
        assert_eq!(peak, 0);
        assert!((z[0].re - 2000.0).abs() < 1e-8);
    }

    #[test]
    fn delayed_peak_and_direct_sum() {
        let x = chirp();
        let n = x.len();
        let d: Vec<Complex64> = (0..n).map(|i| x[(i + n - 100) % n]).collect();
        let z = matched_filter(&d, &x).unwrap();
        let peak = (0..n).max_by(|&a, &b| z[a].norm().total_cmp(&z[b].norm())).unwrap();
        assert_eq!(peak, 100);
        for k in [0usize, 1, 99, 100, 101, 1500] {
            let direct: Complex64 = (0..n).map(|i| d[i] * x[(i + n - k) % n].conj()).sum();
            assert!((direct - z[k]).norm() < 1e-9 * 2000.0);
        }
    }

    #[test]
    fn observation_shape_checks() {
        let x = chirp();
        assert!(EveObservation::new(vec![x.clone()], vec![x.clone(), x.clone()], 20.0, 20.0).is_err());
        assert!(EveObservation::new(vec![x[..5].to_vec()], vec![x.clone()], 20.0, 20.0).is_err());
        assert!(matched_filter(&x[..5], &x).is_err());
    }
}
