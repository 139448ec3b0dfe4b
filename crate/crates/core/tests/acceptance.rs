//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p iqo-core --test acceptance -- --nocapture`.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use iqo::basin::*;
use iqo::classical::{enumerate_minima, ground_state, greedy_descent};
use iqo::protocol::*;
use iqo::quantum::*;
use iqo::rng;
use iqo::sk::{overlap_slope, SkInstance, SpinConfig};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn classical_limit() -> Outcome {
    let clock = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..20u64 {
        let n = 2 + (k as usize % 9);
        let inst = SkInstance::generate(n, 1.0, 100 + k).unwrap();
        let mut rng = rng::stream(200 + k);
        let r = SpinConfig::random(n, &mut rng);
        let bz = rng.random_range(0.0..4.0);
        let got = full_spectrum(&inst, &r, FieldPoint::new(bz, 0.0).unwrap()).unwrap().eigenvalues;
        let mut want: Vec<f64> = (0..1u64 << n)
            .map(|a| {
                let c = SpinConfig::from_index(n, a);
                let align: f64 = (0..n).map(|i| r.spin_f64(i) * c.spin_f64(i)).sum();
                inst.energy(&c).unwrap() - bz * align
            })
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    let t = clock.elapsed();
    outcome(
        worst < 1e-10 && t < Duration::from_secs(60),
        format!("20 instances n=2..10, max |Δ| = {worst:.2e} (tol 1e-10), {:.1}s (limit 60s)", t.as_secs_f64()),
    )
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn zeeman_slopes() -> Outcome {
    let n = 8;
    let bzs: Vec<f64> = (0..9).map(|k| 0.1 + 0.35 * k as f64).collect();
    let (mut worst_ref, mut worst_other, mut levels) = (0.0f64, 0.0f64, 0);
    for seed in 0..5 {
        let inst = SkInstance::generate(n, 1.0, 300 + seed).unwrap();
        let minima = enumerate_minima(&inst).unwrap();
        let r = minima.last().unwrap().config.clone();
        let h = ReferenceHamiltonian::new(&inst, &r).unwrap();
        // Level of each basis state, identified through its eigenvector.
        let mut tracks: Vec<Vec<f64>> = vec![Vec::new(); minima.len()];
        for &bz in &bzs {
            let s = spectrum(&h, FieldPoint::new(bz, 0.0).unwrap(), SpectrumMode::Dense, true).unwrap();
            let vecs = s.eigenvectors.unwrap();
            for (t, m) in tracks.iter_mut().zip(&minima) {
                let a = m.config.index() as usize;
                let k = (0..vecs.len()).max_by(|&x, &y| vecs[x][a].abs().total_cmp(&vecs[y][a].abs())).unwrap();
                t.push(s.eigenvalues[k]);
            }
        }
        for (t, m) in tracks.iter().zip(&minima) {
            let want = -(n as f64) * overlap_slope(&m.config, &r).unwrap();
            let err = (slope(&bzs, t) - want).abs();
            if m.config == r {
                worst_ref = worst_ref.max(err);
            } else {
                worst_other = worst_other.max(err);
                levels += 1;
            }
        }
    }
    outcome(
        worst_ref < 1e-8 && worst_other < 1e-8,
        format!("bx=0, n=8, 5 instances: reference slope error {worst_ref:.1e}, {levels} other minima max error {worst_other:.1e} (tol 1e-8)"),
    )
}

fn gap_trend() -> Outcome {
    let clock = Instant::now();
    let chis = [0.25, 0.5, 1.0, 2.0];
    let mut sums = [0.0; 4];
    let (mut used, mut seed, mut concave) = (0, 0u64, true);
    while used < 20 {
        let inst = SkInstance::generate(10, 1.0, 5000 + seed).unwrap();
        seed += 1;
        let Some(r) = common::excited_reference(&inst) else { continue };
        let bz_max = desk_bz_max(&inst, &r).unwrap();
        let h = ReferenceHamiltonian::new(&inst, &r.config).unwrap();
        let grid = common::descending(bz_max, 0.02, 48);
        let opts = GapOptions { search: GapSearch::FirstDip, refine: true, mode: SpectrumMode::LowK(2) };
        for (k, &chi) in chis.iter().enumerate() {
            let g = gap_scan(&h, chi, &grid, opts).unwrap();
            sums[k] += g.gap;
        }
        if used == 0 {
            // Ground level along a ray is a minimum of linear functions of bz.
            let e0: Vec<f64> = grid
                .iter()
                .map(|&bz| low_spectrum(&h, FieldPoint::on_ray(1.0, bz), 1, false).unwrap().eigenvalues[0])
                .collect();
            concave = e0.windows(3).all(|w| w[0] + w[2] - 2.0 * w[1] <= 1e-9);
        }
        used += 1;
    }
    let means: Vec<f64> = sums.iter().map(|s| s / used as f64).collect();
    let increasing = means.windows(2).all(|w| w[1] > w[0]);
    let t = clock.elapsed();
    outcome(
        increasing && concave && t < Duration::from_secs(600),
        format!(
            "n=10, {used} instances, mean first-dip gap at chi {chis:?} = [{}], ground level concave: {concave}, {:.0}s (limit 600s)",
            means.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>().join(", "),
            t.as_secs_f64()
        ),
    )
}

fn self_energy_limits() -> Outcome {
    let n = 100;
    let mut rng = rng::stream(400);
    let (mut e_lin, mut e_weak, mut e_strong) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let d = rng.random_range(0..=n);
        let f = rng.random_range(0.25..0.75);
        let c = BasinCurve::at_distance(0.0, d, n, f).unwrap();
        let bz_cap = if c.m_l < 0.0 { 0.99 * f / -c.m_l } else { 5.0 };
        let bz = rng.random_range(0.0..bz_cap.min(5.0));
        let lin = self_energy(&c, n, 1.0, bz, 0.0);
        e_lin = e_lin.max((lin + c.m_l * n as f64 * bz).abs() / (n as f64 * (1.0 + bz)));
        let weak = self_energy(&c, n, 1.0, 0.0, 0.01);
        e_weak = e_weak.max((weak / (-(n as f64) * 1e-4 / (2.0 * f)) - 1.0).abs());
        let strong = self_energy(&c, n, 1.0, 0.0, 100.0);
        e_strong = e_strong.max((strong / (-(n as f64) * 100.0) - 1.0).abs());
    }
    outcome(
        e_lin < 1e-12 && e_weak < 0.01 && e_strong < 0.01,
        format!("10^4 random (m, f): bx=0 rel err {e_lin:.1e}, bx=0.01 rel err {e_weak:.2e}, bx=100 rel err {e_strong:.2e} (tol 1%)"),
    )
}

fn zero_slope_censorship() -> Outcome {
    let sampler = EnergySampler::Gaussian { mean: -0.47, sd: 0.1 };
    let mut rng = rng::stream(500);
    let (mut violations, mut lower) = (0, 0usize);
    for k in 0..10_000u64 {
        let n = rng.random_range(20..=200);
        let eps_r = rng.random_range(-0.75..-0.4);
        let ens = sample_ensemble(n, 100, &sampler, eps_r, 1.0, rng::derive_seed(501, k)).unwrap();
        let c = count_crossings(&ens, 0.0, auto_bz_hi(&ens, 0.0), 256).unwrap();
        if c.n_above > 0 {
            violations += 1;
        }
        lower += c.n_below;
    }
    outcome(
        violations == 0 && lower > 0,
        format!("10^4 ensembles at chi=0: {violations} with upward crossings, {lower} downward crossings seen"),
    )
}

fn fit_round_trip() -> Outcome {
    let clock = Instant::now();
    let chis: Vec<f64> = (0..16).map(|k| 3.6 + 0.05 * 10f64.powf(k as f64 * 2.5 / 15.0)).collect();
    let eps = [-0.74, -0.72, -0.70, -0.66, -0.62];
    let rel = |f: &FitResult| {
        [(f.gamma / 1.2 - 1.0).abs(), (f.delta.unwrap_or(f64::NAN) / 2.0 - 1.0).abs(), (f.chi_c / 3.6 - 1.0).abs()]
            .into_iter()
            .fold(0.0, f64::max)
    };
    let clean = fit_exponents(&synthetic_table(1.2, 2.0, 3.6, EPS_GS_LARGE_N, &chis, &eps, 0.0, 0), EPS_GS_LARGE_N)
        .map(|f| rel(&f))
        .unwrap_or(f64::INFINITY);
    let noisy = (0..10)
        .map(|s| {
            let pts = synthetic_table(1.2, 2.0, 3.6, EPS_GS_LARGE_N, &chis, &eps, 0.05, 600 + s);
            fit_exponents(&pts, EPS_GS_LARGE_N).map(|f| rel(&f)).unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max);
    let t = clock.elapsed();
    outcome(
        clean < 0.02 && noisy < 0.10 && t < Duration::from_secs(60),
        format!(
            "(gamma, delta, chi_c) = (1.2, 2.0, 3.6): noiseless max rel err {clean:.1e} (tol 2%), 5% noise worst of 10 {noisy:.3} (tol 10%), {:.1}s",
            t.as_secs_f64()
        ),
    )
}

fn end_to_end() -> Outcome {
    let runs = 20u64;
    let (mut monotone, mut hits, mut quench) = (0, 0, 0);
    for s in 0..runs {
        let inst = SkInstance::generate(10, 1.0, 5000 + s).unwrap();
        let gs = ground_state(&inst).unwrap();
        let start = SpinConfig::random(10, &mut rng::stream(77 + s));
        let seed_ref = greedy_descent(&inst, &start, 0).unwrap();
        let cfg = CycleConfig { bz_max: desk_bz_max(&inst, &seed_ref).unwrap(), seed: s, ..Default::default() };
        let opts = RunOptions { ground_energy: Some(gs.energy), ..Default::default() };
        let rec = iterate(&inst, &start, &cfg, 50, &opts).unwrap();
        monotone += rec.reference_energy_trace.windows(2).all(|w| w[1] <= w[0]) as usize;
        hits += (rec.reached_ground_state == Some(true)) as usize;
        quench += (rec.n_cycles == 0) as usize;
    }
    let (mut adiabatic, mut tried, mut seed) = (0, 0, 0u64);
    while tried < runs {
        let inst = SkInstance::generate(10, 1.0, 5000 + seed).unwrap();
        seed += 1;
        let Some(r) = common::excited_reference(&inst) else { continue };
        let gs = ground_state(&inst).unwrap();
        let cfg = CycleConfig {
            chi: 4.0,
            bz_max: desk_bz_max(&inst, &r).unwrap(),
            tau2: 100.0,
            tau3: 2000.0,
            dt_max: 0.05,
            seed,
            ..Default::default()
        };
        let (res, _) = run_cycle(&inst, &r, &cfg).unwrap();
        adiabatic += ((res.energy_after - gs.energy).abs() < acceptance_tolerance(&inst)) as usize;
        tried += 1;
    }
    let pct = |k: usize, of: u64| 100.0 * k as f64 / of as f64;
    outcome(
        monotone as u64 == runs && pct(hits, runs) >= 70.0 && pct(adiabatic, runs) >= 95.0,
        format!(
            "n=10, 20 instances, budget 50: non-increasing traces {monotone}/20, ground state {hits}/20 (need 70%, quench alone {quench}/20), adiabatic single cycle from highest excited minimum {adiabatic}/20 (need 95%)"
        ),
    )
}

fn unitarity_and_born() -> Outcome {
    let mut drift_rate = 0.0f64;
    for s in 0..3 {
        let inst = SkInstance::generate(10, 1.0, 700 + s).unwrap();
        let r = enumerate_minima(&inst).unwrap().pop().unwrap().config;
        let h = ReferenceHamiltonian::new(&inst, &r).unwrap();
        let cfg = CycleConfig::default();
        let top = FieldPoint::new(cfg.bz_max, 0.0).unwrap();
        let turn = FieldPoint::new(cfg.bz_max, cfg.chi * cfg.bz_max).unwrap();
        let origin = FieldPoint::new(0.0, 0.0).unwrap();
        let sched = [Segment::new(top, turn, cfg.tau2), Segment::new(turn, origin, cfg.tau3)];
        let out = evolve(&h, &sched, &QuantumState::basis(10, r.index()), cfg.dt_max).unwrap();
        drift_rate = drift_rate.max(out.norm_drift / out.elapsed);
    }
    let p_min = (0..50u64)
        .map(|k| common::born_p_value(&common::random_state(4, 800 + k), 100_000, 900 + k))
        .fold(1.0, f64::min);
    outcome(
        drift_rate < 1e-9 && p_min > 0.001,
        format!("norm drift {drift_rate:.1e} per unit time (tol 1e-9); 50 random 4-qubit states x 10^5 shots, min chi-square p = {p_min:.4} (need > 0.001)"),
    )
}

fn declared_out_of_scope() -> Outcome {
    let inst = SkInstance::generate(6, 1.0, 1).unwrap();
    let rec = iterate(&inst, &SpinConfig::all_up(6), &CycleConfig::default(), 1, &RunOptions::default()).unwrap();
    let json = serde_json::to_value(&rec).unwrap();
    let logged = json.get("n_cycles").is_some() && json.get("tau3").is_some();
    outcome(
        logged,
        "gap and localization exponents, system-size scaling of optimization time, and annealing-time scaling are not asserted at desk scale; substituted by the property suites above, with (n_cycles, tau3) logged in every run record".into(),
    )
}

#[test]
fn acceptance_suite() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("classical-limit exactness", classical_limit),
        ("reference Zeeman slope", zeeman_slopes),
        ("gap opening with slope", gap_trend),
        ("self-energy limits", self_energy_limits),
        ("zero-slope crossing censorship", zero_slope_censorship),
        ("scaling-law fit round trip", fit_round_trip),
        ("end-to-end optimization", end_to_end),
        ("unitarity and Born sampling", unitarity_and_born),
        ("declared not reproducible at desk scale", declared_out_of_scope),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let clock = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        // Written to the raw handle so the line shows without --nocapture.
        let line = format!("[{tag}] {name}: {} ({:.1}s)\n", o.detail, clock.elapsed().as_secs_f64());
        std::io::stderr().write_all(line.as_bytes()).expect("stderr");
        if !o.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
