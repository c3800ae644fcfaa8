//! FFT plumbing shared by every module.
//!
//! Plans are cached per thread, so the helpers can be called from worker
//! pools without locking.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// In-place forward DFT, `X[k] = sum x[n] e^{-j 2 pi k n / N}` (unnormalized).
pub fn fft_in_place(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), false).process(buf);
    }
}

/// In-place inverse DFT including the `1/N` factor.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    if n > 1 {
        plan(n, true).process(buf);
    }
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
}

pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut out = x.to_vec();
    fft_in_place(&mut out);
    out
}

pub fn ifft(x: &[Complex64]) -> Vec<Complex64> {
    let mut out = x.to_vec();
    ifft_in_place(&mut out);
    out
}

/// Unitary DFT (`1/sqrt(N)` on both directions); used on the communication
/// link so that per-bin and per-sample noise variances coincide.
pub fn fft_unitary(x: &[Complex64]) -> Vec<Complex64> {
    let mut out = fft(x);
    let scale = 1.0 / (x.len() as f64).sqrt();
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

pub fn ifft_unitary(x: &[Complex64]) -> Vec<Complex64> {
    let mut out = ifft(x);
    let scale = (x.len() as f64).sqrt();
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// Circular cross-correlation `z[k] = sum_n a[n] conj(b[n - k])` via the DFT.
pub fn circular_xcorr(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    debug_assert_eq!(a.len(), b.len());
    let fa = fft(a);
    let fb = fft(b);
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y.conj()).collect();
    ifft(&prod)
}

/// Signed index of DFT bin `k` of an `n`-point transform.
pub fn signed_bin(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Three-point parabolic peak offset in `(-0.5, 0.5)` bins.
pub fn parabolic_offset(left: f64, centre: f64, right: f64) -> f64 {
    let denom = left - 2.0 * centre + right;
    if denom.abs() < f64::EPSILON * centre.abs().max(1.0) {
        0.0
    } else {
        (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
    }
}
