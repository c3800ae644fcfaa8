use secfmcw_sim::sweep::{sweepable_paths, with_value};
use secfmcw_sim::{ScenarioConfig, SimError};

#[test]
fn defaults_are_the_reference_operating_point() {
    let c = ScenarioConfig::default();
    assert_eq!(c.band.allocated_band_hz, 80e6);
    assert_eq!((c.band.bw_min_hz, c.band.bw_max_hz), (30e6, 50e6));
    assert_eq!(c.band.sample_rate_hz, 100e6);
    assert_eq!(c.band.chirp_duration_s, 20e-6);
    assert_eq!(c.num_samples(), 2000);
    assert_eq!((c.codebook.order, c.codebook.code_len, c.codebook.library_size), (256, 40, 10));
    assert_eq!(c.codebook.epsilon, 0.1);
    assert_eq!(c.scene.carrier_hz, 2.4e9);
    let ranges: Vec<f64> = c.scene.targets.iter().map(|t| t.range_m).collect();
    let speeds: Vec<f64> = c.scene.targets.iter().map(|t| t.velocity_mps).collect();
    assert_eq!(ranges, vec![45.0, 100.0, 160.0]);
    assert_eq!(speeds, vec![15.0, -25.0, 25.0]);
    assert_eq!(c.frame.n_chirps, 64);
    assert_eq!(c.trials.rmse_trials, 200);
    assert_eq!(c.trials.ber_chirps, 10_000);
    c.validate().unwrap();
}

#[test]
fn toml_round_trip() {
    let c = ScenarioConfig::default();
    let back = ScenarioConfig::from_toml_str(&c.to_toml()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
    let partial = ScenarioConfig::from_toml_str("seed = 7\n[codebook]\nsize = 8\n").unwrap();
    assert_eq!((partial.seed, partial.codebook.size, partial.codebook.code_len), (7, 8, 40));
}

#[test]
fn unknown_fields_are_parse_errors() {
    assert!(matches!(ScenarioConfig::from_toml_str("[codebook]\nsizes = 8\n"), Err(SimError::Parse { .. })));
    assert!(matches!(ScenarioConfig::from_toml_str("seed = \"x\"\n"), Err(SimError::Parse { .. })));
}

#[test]
fn every_field_changes_the_hash() {
    let base = ScenarioConfig::default();
    let h0 = base.hash();
    let mut seen = std::collections::HashSet::new();
    for path in sweepable_paths(&base) {
        let current = serde_json::to_value(&base).unwrap();
        let v = current.pointer(&format!("/{}", path.replace('.', "/"))).unwrap();
        let old = v.as_f64().or_else(|| v.as_array().and_then(|a| a[0].as_f64())).unwrap();
        // nudge upwards while keeping integers integral and the config valid
        let candidates = [old + 1.0, old * 2.0, old * 0.5, old + 0.001];
        let changed = candidates.iter().find_map(|&x| with_value(&base, &path, x).ok().filter(|c| *c != base));
        let Some(c) = changed else { continue };
        let h = c.hash();
        assert_ne!(h, h0, "{path}");
        seen.insert(path);
    }
    assert!(seen.len() > 30, "only {} paths exercised", seen.len());
    let mut c = base.clone();
    c.output.dir = "elsewhere".into();
    assert_ne!(c.hash(), h0);
}

#[test]
fn validation_collects_every_violation() {
    let mut c = ScenarioConfig::default();
    c.codebook.code_len = 33;
    c.frame.n_chirps = 1;
    c.scene.pfa = 2.0;
    c.scene.targets[0].range_m = 1e5;
    match c.validate() {
        Err(SimError::Validation(v)) => {
            assert!(v.len() >= 4, "{v:?}");
            let json = SimError::Validation(v).to_json();
            let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
            assert_eq!(parsed["error"], "validation");
            assert!(parsed["details"]["violations"].as_array().unwrap().len() >= 4);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn oversized_codebook_is_rejected() {
    let mut c = ScenarioConfig::default();
    c.codebook.code_len = 1;
    c.band.chirp_duration_s = 20e-6;
    c.codebook.size = 1000;
    assert!(matches!(c.validate(), Err(SimError::Validation(_))));
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip_and_hash_track_the_seed(seed in any::<u64>(), other in any::<u64>()) {
            let mut a = ScenarioConfig::default();
            a.seed = seed;
            let back = ScenarioConfig::from_toml_str(&a.to_toml()).unwrap();
            prop_assert_eq!(back.hash(), a.hash());
            let mut b = a.clone();
            b.seed = other;
            prop_assert_eq!(a.hash() == b.hash(), seed == other);
        }

        #[test]
        fn snr_lists_round_trip(snr in proptest::collection::vec(-20.0f64..40.0, 0..8)) {
            let mut a = ScenarioConfig::default();
            a.comm.snr_db = snr.clone();
            let back = ScenarioConfig::from_toml_str(&a.to_toml()).unwrap();
            prop_assert_eq!(&back.comm.snr_db, &snr);
            prop_assert_eq!(back.hash(), a.hash());
        }
    }
}
