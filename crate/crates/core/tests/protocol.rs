mod common;

use iqo::classical::{enumerate_minima, ground_state};
use iqo::protocol::*;
use iqo::quantum::ReferenceHamiltonian;
use iqo::rng;
use iqo::sk::{SkInstance, SpinConfig};

#[test]
fn subcritical_slope_returns_to_reference() {
    let inst = SkInstance::generate(10, 1.0, 5003).unwrap();
    let r = enumerate_minima(&inst).unwrap().swap_remove(2);
    let cfg = CycleConfig { chi: 0.05, bz_max: 3.2, tau3: 20.0, ..Default::default() };
    let (res, next) = run_cycle(&inst, &r, &cfg).unwrap();
    assert!(res.reference_probability > 0.9, "{}", res.reference_probability);
    assert_eq!(next, r);
}

#[test]
fn adiabatic_cycle_lands_in_ground_state_at_n8() {
    let mut checked = 0;
    for seed in 0..6 {
        let inst = SkInstance::generate(8, 1.0, 40 + seed).unwrap();
        let Some(r) = common::excited_reference(&inst) else { continue };
        let gs = ground_state(&inst).unwrap();
        let bz_max = desk_bz_max(&inst, &r).unwrap();
        let cfg = CycleConfig { chi: 4.0, bz_max, tau2: 100.0, tau3: 2000.0, dt_max: 0.05, ..Default::default() };
        let (res, _) = run_cycle(&inst, &r, &cfg).unwrap();
        assert!((res.energy_after - gs.energy).abs() < 1e-9, "seed {seed}: {res:?}");
        checked += 1;
    }
    assert!(checked >= 3);
}

#[test]
fn run_invariants_hold_across_seeds() {
    for seed in 0..6 {
        let inst = SkInstance::generate(9, 1.0, 70 + seed).unwrap();
        let start = SpinConfig::random(9, &mut rng::stream(seed));
        let cfg = CycleConfig { seed, tau3: 10.0, ..Default::default() };
        let rec = iterate(&inst, &start, &cfg, 12, &RunOptions::default()).unwrap();
        assert!(rec.reference_energy_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(rec.reference_energy_trace.len(), rec.n_cycles + 1);
        assert_eq!(rec.chi_trace.len(), rec.n_cycles);
        assert!(rec.final_energy <= rec.initial_energy);
        let want_time = rec.n_cycles as f64 * cfg.cycle_time();
        assert!((rec.simulated_time - want_time).abs() < 1e-9);
        for c in &rec.cycles {
            assert_eq!(c.accepted, c.energy_after < c.energy_before - acceptance_tolerance(&inst));
        }
        let mut log = Vec::new();
        rec.write_jsonl(&mut log).unwrap();
        assert_eq!(String::from_utf8(log).unwrap().lines().count(), rec.n_cycles);
    }
}

#[test]
fn run_stops_at_known_ground_state() {
    let inst = SkInstance::generate(10, 1.0, 5001).unwrap();
    let gs = ground_state(&inst).unwrap();
    let start = SpinConfig::random(10, &mut rng::stream(78));
    let opts = RunOptions { ground_energy: Some(gs.energy), ..Default::default() };
    let rec = iterate(&inst, &start, &CycleConfig::default(), 50, &opts).unwrap();
    assert_eq!(rec.reached_ground_state, Some(true));
    assert!(rec.n_cycles < 50);
}

#[test]
fn runs_are_deterministic() {
    let inst = SkInstance::generate(8, 1.0, 3).unwrap();
    let start = SpinConfig::random(8, &mut rng::stream(3));
    let cfg = CycleConfig { seed: 9, ..Default::default() };
    let a = iterate(&inst, &start, &cfg, 5, &RunOptions::default()).unwrap();
    let b = iterate(&inst, &start, &cfg, 5, &RunOptions::default()).unwrap();
    assert_eq!(a.cycles, b.cycles);
    assert_eq!(a.chi_trace, b.chi_trace);
}

#[test]
fn tau3_estimate_is_capped() {
    let inst = SkInstance::generate(10, 1.0, 5003).unwrap();
    let r = enumerate_minima(&inst).unwrap().swap_remove(2);
    let h = ReferenceHamiltonian::new(&inst, &r.config).unwrap();
    let (small, gap_small) = estimate_tau3(&h, 0.1, 3.2, 10.0, 500.0).unwrap();
    assert_eq!(small, 500.0);
    assert!(gap_small < 1e-3);
    let (large, gap_large) = estimate_tau3(&h, 4.0, 3.2, 10.0, 1e6).unwrap();
    assert!((large - 10.0 / (gap_large * gap_large)).abs() < 1e-9 * large);
    assert!(gap_large > gap_small);
}
