use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use secfmcw::waveform::{
    build_frame, generate_chirp, generate_pilot, instantaneous_phase, BandPlan, PhaseCode, PilotSpec,
};

const T_C: f64 = 20e-6;

fn band() -> BandPlan {
    BandPlan::default()
}

// Plain O(N^2) DFT, kept here so the band-energy check does not lean on the
// library's FFT wrapper.
fn naive_dft_power(x: &[Complex64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let ang = -2.0 * PI * ((k * i) % n) as f64 / n as f64;
                acc += v * Complex64::from_polar(1.0, ang);
            }
            acc.norm_sqr()
        })
        .collect()
}

fn chirp_strategy() -> impl Strategy<Value = (f64, f64, Vec<u32>)> {
    (30u32..=50).prop_flat_map(|b_mhz| {
        let half = (80 - b_mhz) as i32 / 2;
        (
            (-half..=half).prop_map(|f| f as f64 * 1e6),
            Just(b_mhz as f64 * 1e6),
            proptest::collection::vec(0u32..256, 40),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn samples_have_unit_modulus((f, b, code) in chirp_strategy()) {
        let p = band().chirp(f, b, PhaseCode::new(code, 256).unwrap(), T_C).unwrap();
        let x = generate_chirp(&p).unwrap();
        prop_assert_eq!(x.len(), 2000);
        for v in &x.samples {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uncoded_energy_stays_in_band((f, b, _code) in chirp_strategy()) {
        let p = band().chirp(f, b, PhaseCode::zeros(40, 256), T_C).unwrap();
        let x = generate_chirp(&p).unwrap().samples;
        let power = naive_dft_power(&x);
        let n = x.len();
        let df = 100e6 / n as f64;
        let guard = 2.0 / T_C;
        let (lo, hi) = (f - b / 2.0 - guard, f + b / 2.0 + guard);
        let total: f64 = power.iter().sum();
        let outside: f64 = power
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let kk = if *k < n / 2 { *k as f64 } else { *k as f64 - n as f64 };
                let freq = kk * df;
                freq < lo || freq > hi
            })
            .map(|(_, p)| p)
            .sum();
        prop_assert!(outside / total < 0.01, "out-of-band fraction {}", outside / total);
    }

    #[test]
    fn code_appears_as_piecewise_constant_phase((f, b, code) in chirp_strategy()) {
        let coded = band().chirp(f, b, PhaseCode::new(code.clone(), 256).unwrap(), T_C).unwrap();
        let plain = coded.with_code(PhaseCode::zeros(40, 256)).unwrap();
        let x = generate_chirp(&coded).unwrap().samples;
        let y = generate_chirp(&plain).unwrap().samples;
        let chip = x.len() / 40;
        for (n, (a, c)) in x.iter().zip(&y).enumerate() {
            let want = 2.0 * PI * f64::from(code[n / chip]) / 256.0;
            let got = (a * c.conj()).arg();
            let d = (got - want + PI).rem_euclid(2.0 * PI) - PI;
            prop_assert!(d.abs() < 1e-9, "sample {} off by {}", n, d);
        }
    }

    #[test]
    fn generation_is_deterministic((f, b, code) in chirp_strategy()) {
        let p = band().chirp(f, b, PhaseCode::new(code, 256).unwrap(), T_C).unwrap();
        prop_assert_eq!(generate_chirp(&p).unwrap(), generate_chirp(&p).unwrap());
    }
}

#[test]
fn phase_starts_at_zero() {
    let p = band().chirp(7e6, 33e6, PhaseCode::zeros(40, 256), T_C).unwrap();
    assert_eq!(instantaneous_phase(&p, 0.0).unwrap(), 0.0);
}

#[test]
fn quadratic_term_at_short_chirp() {
    // b = 20 MHz over 10 us: the second difference of the phase is 2 pi (b / T) dt^2
    let b = BandPlan::new(80e6, 10e6, 50e6, 1e6, 100e6).unwrap();
    let p = b.chirp(0.0, 20e6, PhaseCode::zeros(40, 256), 10e-6).unwrap();
    let dt = 1e-8;
    let want = 2.0 * PI * (20e6 / 10e-6) * dt * dt;
    for k in 1..900 {
        let t = k as f64 * dt;
        let d2 = instantaneous_phase(&p, t + dt).unwrap() - 2.0 * instantaneous_phase(&p, t).unwrap()
            + instantaneous_phase(&p, t - dt).unwrap();
        assert!((d2 - want).abs() < 1e-9 * want, "k {k}: {d2} vs {want}");
    }
}

#[test]
fn pilots_are_seeded_and_full_band() {
    let a = generate_pilot(&band(), T_C, 40, 256, 0).unwrap();
    let again = generate_pilot(&band(), T_C, 40, 256, 0).unwrap();
    let b = generate_pilot(&band(), T_C, 40, 256, 1).unwrap();
    assert_eq!(a, again);
    assert_eq!(a.params.bandwidth_hz, 80e6);
    assert_eq!(a.params.center_hz, 0.0);
    assert_ne!(a.params.code.indices(), b.params.code.indices());
}

#[test]
fn frame_schedule_counts() {
    let p = band().chirp(0.0, 50e6, PhaseCode::zeros(40, 256), T_C).unwrap();
    let spec = PilotSpec::default();
    let frame = build_frame(&vec![p.clone(); 32], &vec![p.clone(); 32], &band(), &spec, 1e-3).unwrap();
    assert_eq!(frame.len(), 34);
    assert_eq!(frame.pilot_positions, vec![0, 17]);
    assert_eq!(frame.chirps_h.len(), frame.chirps_v.len());

    let short = build_frame(&vec![p.clone(); 5], &vec![p.clone(); 5], &band(), &spec, 1e-3).unwrap();
    assert_eq!(short.pilot_positions, vec![0]);
    assert!(build_frame(&[], &[], &band(), &spec, 1e-3).is_err());
}
