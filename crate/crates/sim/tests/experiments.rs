mod common;

use secfmcw_sim::{run_scenario, sweep, Experiment, ScenarioConfig};

#[test]
fn secure_throughput_sits_below_unconstrained() {
    let out = run_scenario(&ScenarioConfig::default(), Experiment::Fig7, 1).unwrap();
    let sec = out.table.series("throughput_sec_bps");
    let im = out.table.series("throughput_im_pc_bps");
    assert_eq!(sec.len(), 6);
    for ((l, s), (_, i)) in sec.iter().zip(&im) {
        assert!(s < i, "L = {l}");
    }
}

#[test]
fn snr_sweep_gives_one_group_per_value() {
    let mut cfg = common::small_config_with_file("exp-sweep");
    cfg.trials.ber_chirps = 64;
    cfg.trials.eve_ber_chirps = 64;
    let values = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
    let t = sweep(&cfg, Experiment::Fig8, "comm.snr_db", &values, 1).unwrap();
    let mut xs: Vec<f64> = t.rows.iter().map(|r| r.x).collect();
    xs.dedup();
    assert_eq!(xs, values);
    assert!(t.rows.iter().all(|r| r.variable == "snr_db"));
    assert_eq!(t.len(), 7 * 5);
}

#[test]
fn every_experiment_produces_rows() {
    let mut cfg = common::small_config_with_file("exp-all");
    cfg.trials.ber_chirps = 64;
    cfg.trials.eve_ber_chirps = 64;
    cfg.scene.snr_db = vec![20.0];
    for e in Experiment::ALL {
        let out = run_scenario(&cfg, e, 1).unwrap();
        assert!(!out.table.is_empty(), "{}", e.name());
        let hash = cfg.hash();
        assert!(out.table.rows.iter().all(|r| r.config_hash == hash && r.experiment == e.name()));
    }
}

#[test]
fn mismatched_codebook_file_is_rejected() {
    let mut cfg = common::small_config_with_file("exp-mismatch");
    cfg.codebook.code_len = 20;
    assert!(run_scenario(&cfg, Experiment::Af, 1).is_err());
}
