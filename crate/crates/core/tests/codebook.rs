use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use secfmcw::ambiguity::{range_af, ReferenceAfLibrary};
use secfmcw::codebook::{
    admissible_phases_per_chip, bits_per_chirp, enumerate_im_indices, max_throughput, parse_codebook_text,
    validate_codebook, CodebookDesigner, CombinedCodebook, DesignConfig, PhaseCodebook, Scheme, ThroughputParams,
};
use secfmcw::waveform::{generate_chirp, BandPlan, ChirpParams, PhaseCode};

// Independent count: integer-MHz bandwidths, lower edges on the 1 MHz grid
// anywhere the whole sweep fits inside the band.
fn count_pairs(band_mhz: i64, bw_min: i64, bw_max: i64) -> usize {
    let mut count = 0;
    for b in bw_min..=bw_max {
        for lo in -band_mhz / 2..=band_mhz / 2 {
            if lo + b <= band_mhz / 2 {
                count += 1;
            }
        }
    }
    count
}

fn reference_params(scheme_l: usize) -> ThroughputParams {
    ThroughputParams {
        im_size: 861,
        library_size: 10,
        order: 256,
        code_len: scheme_l,
        epsilon: 0.1,
        chirp_duration_s: 20e-6,
    }
}

#[test]
fn im_enumeration_matches_counting_oracle() {
    let band = BandPlan::default();
    let im = enumerate_im_indices(&band).unwrap();
    assert_eq!(count_pairs(80, 30, 50), 861);
    assert_eq!(im.len(), 861);
    for p in im.pairs() {
        assert!(band.contains(p.center_hz, p.bandwidth_hz));
    }
}

#[test]
fn admissible_phase_count() {
    let oracle = |m: u32, eps: f64| ((f64::from(m) / std::f64::consts::PI) * (4.0 * eps).asin()).ceil() as u64 + 1;
    assert_eq!(oracle(256, 0.1), 35);
    assert_eq!(admissible_phases_per_chip(256, 0.1).unwrap(), 35);
    for m in [4u32, 16, 64, 256, 1024] {
        for eps in [0.01, 0.05, 0.1, 0.2] {
            assert_eq!(admissible_phases_per_chip(m, eps).unwrap(), oracle(m, eps));
        }
    }
}

#[test]
fn closed_form_throughput() {
    let p = reference_params(40);
    assert_eq!(bits_per_chirp(Scheme::ImPcFmcw, &p).unwrap(), 659);
    assert_eq!(bits_per_chirp(Scheme::SecFmcw, &p).unwrap(), 436);
    assert!((max_throughput(Scheme::ImPcFmcw, &p).unwrap() - 32.95e6).abs() < 1.0);
    assert!((max_throughput(Scheme::SecFmcw, &p).unwrap() - 21.8e6).abs() < 1.0);
    // direct evaluation of the two bit counts
    let im_pc = (2.0 * ((861f64).log2() + 40.0 * 8.0)).floor();
    let sec = (2.0 * ((8610f64).log2() + 40.0 * (35f64).log2())).floor();
    assert_eq!((im_pc, sec), (659.0, 436.0));
}

#[test]
fn throughput_grows_with_code_length() {
    let mut last = 0.0;
    for l in [10, 20, 40, 60] {
        let t = max_throughput(Scheme::SecFmcw, &reference_params(l)).unwrap();
        assert!(t > last);
        last = t;
    }
}

struct Small {
    band: BandPlan,
    anchor: ChirpParams,
    library: ReferenceAfLibrary,
}

// 200-sample chirps keep the designer fast enough for the test suite.
fn small() -> Small {
    let band = BandPlan::new(8e6, 4e6, 6e6, 1e6, 10e6).unwrap();
    let anchor = band.chirp(0.0, 6e6, PhaseCode::zeros(8, 16), 20e-6).unwrap();
    let nominal = range_af(&generate_chirp(&anchor).unwrap().samples);
    let library = ReferenceAfLibrary::ladder(&nominal, 6, 3, 0.2, 0.0).unwrap();
    Small { band, anchor, library }
}

fn design(s: &Small, size: usize, seed: u64) -> (secfmcw::codebook::DesignOutcome, u64) {
    let cfg = DesignConfig {
        size,
        epsilon: 0.1,
        order: 16,
        code_len: 8,
        max_sweeps: 4,
        seed,
    };
    let mut d = CodebookDesigner::new(cfg, &s.library, &s.anchor).unwrap();
    let out = d.run().unwrap();
    (out, d.distinctness_ops)
}

#[test]
fn designer_output_passes_independent_validator() {
    let s = small();
    let (out, _) = design(&s, 6, 3);
    let report = validate_codebook(&out.codebook, &s.library, &s.anchor).unwrap();
    assert!(out.infeasible.is_empty(), "infeasible rows {:?}", out.infeasible);
    assert!(report.is_valid(), "{:?}", report.violations);
    assert!(report.max_mismatch <= 0.1);
    for w in out.objective_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "objective rose: {:?}", out.objective_trace);
    }
    assert_eq!(s.band.sample_rate_hz, 10e6);
}

#[test]
fn designer_is_deterministic() {
    let s = small();
    let (a, _) = design(&s, 4, 9);
    let (b, _) = design(&s, 4, 9);
    assert_eq!(a, b);
}

#[test]
fn validator_flags_duplicates_and_alphabet() {
    let s = small();
    let row = PhaseCode::new(vec![0, 1, 2, 3, 4, 5, 6, 7], 16).unwrap();
    let cb = PhaseCodebook::from_rows(vec![row.clone(), row], &s.library, &s.anchor, 0.1, 0).unwrap();
    let report = validate_codebook(&cb, &s.library, &s.anchor).unwrap();
    assert!(report.violations.iter().any(|v| v.contains("identical")));

    let mut wrong = cb.clone();
    wrong.order = 8;
    let report = validate_codebook(&wrong, &s.library, &s.anchor).unwrap();
    assert!(report.violations.iter().any(|v| v.contains("alphabet")));
}

#[test]
fn distinctness_work_quadruples_with_size() {
    let s = small();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows = |g: usize, rng: &mut ChaCha8Rng| -> Vec<PhaseCode> { (0..g).map(|_| PhaseCode::random(8, 16, rng)).collect() };
    let ops = |g: usize, rng: &mut ChaCha8Rng| {
        let cb = PhaseCodebook::from_rows(rows(g, rng), &s.library, &s.anchor, 0.1, 0).unwrap();
        validate_codebook(&cb, &s.library, &s.anchor).unwrap().distinctness_ops
    };
    for g in [8usize, 16, 32] {
        let ratio = ops(2 * g, &mut rng) as f64 / ops(g, &mut rng) as f64;
        assert!((2.0..=8.0).contains(&ratio), "G {g}: ratio {ratio}");
        assert!((ratio - 4.0).abs() < 0.7, "G {g}: ratio {ratio}");
    }
    let (_, small_ops) = design(&s, 4, 1);
    let (_, big_ops) = design(&s, 8, 1);
    let ratio = big_ops as f64 / small_ops.max(1) as f64;
    assert!((2.0..=8.0).contains(&ratio), "designer ratio {ratio}");
}

#[test]
fn codebook_text_round_trip() {
    let s = small();
    let (out, _) = design(&s, 4, 2);
    let text = out.codebook.to_text();
    let (header, rows) = parse_codebook_text(&text).unwrap();
    assert_eq!(rows, out.codebook.rows);
    assert_eq!(header.size, 4);
    assert_eq!(header.code_len, 8);
}

fn combined(g: usize) -> CombinedCodebook {
    let band = BandPlan::default();
    let im = enumerate_im_indices(&band).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(g as u64);
    CombinedCodebook::new(im, (0..g).map(|_| PhaseCode::random(40, 256, &mut rng)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bit_mapping_round_trips(g in 1usize..80, pool in proptest::collection::vec(any::<bool>(), 64)) {
        let cb = combined(g);
        let w = cb.bit_width();
        prop_assert_eq!(w, (cb.size() as f64).log2().floor() as usize);
        let bits = pool[..2 * w].to_vec();
        let (v, h) = cb.encode_bits(&bits).unwrap();
        prop_assert!(v < cb.size() && h < cb.size());
        let mut back = cb.decode_entry(v).unwrap();
        back.extend(cb.decode_entry(h).unwrap());
        prop_assert_eq!(back, bits);
        let (u, k) = cb.split(v);
        prop_assert_eq!(cb.join(u, k), v);
    }
}
