//! The four-step iterative optimization cycle.
//!
//! 1. Prepare the reference bit-string and ramp `B_z` from 0 to `bz_max` with
//!    `B_x = 0`. The Hamiltonian is diagonal, so the state is untouched and the
//!    step is applied analytically; `tau1` only enters the time accounting.
//! 2. Hold `B_z = bz_max` and ramp `B_x` from 0 to `chi * bz_max` over `tau2`.
//! 3. Ramp both fields to zero along `B_x = chi B_z` over `tau3`.
//! 4. Measure, descend greedily to a local minimum and accept it as the new
//!    reference only if its energy is strictly lower.
//!
//! Between cycles a tuner nudges `chi` up after repeated returns to the same
//! reference and down after repeated landings on higher minima.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classical::{self, greedy_descent, simulated_anneal};
use crate::error::{invalid, Result};
use crate::quantum::{
    evolve, gap_scan, measure, FieldPoint, GapOptions, GapSearch, QuantumState,
    ReferenceHamiltonian, Segment, SpectrumMode,
};
use crate::rng::derive_seed;
use crate::sk::{LocalMinimum, SkInstance, SpinConfig};

/// Parameters of one cycle. Fields are in units of `J`, times in `1/J`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleConfig {
    /// Step-3 slope `B_x / B_z`.
    pub chi: f64,
    pub bz_max: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    /// Largest integrator step.
    pub dt_max: f64,
    pub seed: u64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self { chi: 1.0, bz_max: 3.0, tau1: 1.0, tau2: 10.0, tau3: 20.0, dt_max: 0.02, seed: 0 }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("chi", self.chi),
            ("bz_max", self.bz_max),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("tau3", self.tau3),
            ("dt_max", self.dt_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Simulated duration of one cycle.
    pub fn cycle_time(&self) -> f64 {
        self.tau1 + self.tau2 + self.tau3
    }

    /// `bz_max = 2 J (1 + m)` with `m` the largest overlap of any other known
    /// minimum with the reference (clamped at zero).
    pub fn default_bz_max(j_scale: f64, max_other_slope: f64) -> f64 {
        2.0 * j_scale * (1.0 + max_other_slope.max(0.0))
    }
}

/// Slope tuner settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunerPolicy {
    pub enabled: bool,
    /// Consecutive failures of one kind before `chi` moves.
    pub patience: usize,
    /// Relative increase after repeated returns to the reference.
    pub up: f64,
    /// Relative decrease after repeated higher-energy outcomes.
    pub down: f64,
}

impl Default for TunerPolicy {
    fn default() -> Self {
        Self { enabled: true, patience: 3, up: 0.05, down: 0.05 }
    }
}

impl TunerPolicy {
    pub fn disabled() -> Self {
        Self { enabled: false, ..Self::default() }
    }
}

/// Outcome of one cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleResult {
    pub chi: f64,
    /// Bit-string read out at step 4 (hex, see [`SpinConfig::to_hex`]).
    pub measured: String,
    /// Local minimum reached from the measured string.
    pub descended: String,
    pub energy_measured: f64,
    /// Reference energy entering the cycle.
    pub energy_before: f64,
    /// Energy of the descended minimum.
    pub energy_after: f64,
    pub accepted: bool,
    /// The descended minimum is the reference itself.
    pub returned: bool,
    /// Probability of reading out the reference string.
    pub reference_probability: f64,
    pub min_gap_seen: Option<f64>,
    pub norm_drift: f64,
    /// Reference energy after the cycle.
    pub reference_energy: f64,
}

impl CycleResult {
    fn went_up(&self) -> bool {
        self.energy_after > self.energy_before
    }
}

/// Strict-decrease tolerance `1e-9 n J`.
pub fn acceptance_tolerance(inst: &SkInstance) -> f64 {
    1e-9 * inst.n() as f64 * inst.j_scale()
}

/// Runs one cycle against `reference`. `h` must be built for `reference`.
pub fn run_cycle_with(
    inst: &SkInstance,
    h: &ReferenceHamiltonian,
    reference: &LocalMinimum,
    cfg: &CycleConfig,
) -> Result<(CycleResult, LocalMinimum)> {
    cfg.validate()?;
    if h.reference() != &reference.config {
        return invalid("Hamiltonian was built for a different reference");
    }
    if !inst.is_single_flip_stable(&reference.config) {
        return invalid("reference is not a single-flip-stable minimum");
    }
    // Step 1 is exact: the basis state is an eigenstate for every bz at bx = 0.
    let v0 = QuantumState::basis(inst.n(), reference.config.index());
    let top = FieldPoint::new(cfg.bz_max, 0.0)?;
    let turn = FieldPoint::new(cfg.bz_max, cfg.chi * cfg.bz_max)?;
    let origin = FieldPoint::new(0.0, 0.0)?;
    let schedule = [Segment::new(top, turn, cfg.tau2), Segment::new(turn, origin, cfg.tau3)];
    let out = evolve(h, &schedule, &v0, cfg.dt_max)?;
    let reference_probability = out.state.probabilities()[reference.config.index() as usize];
    let measured = measure(&out.state, derive_seed(cfg.seed, 1))?;
    let descended = greedy_descent(inst, &measured, derive_seed(cfg.seed, 2))?;
    let accepted = descended.energy < reference.energy - acceptance_tolerance(inst);
    let next = if accepted { descended.clone() } else { reference.clone() };
    let result = CycleResult {
        chi: cfg.chi,
        measured: measured.to_hex(),
        descended: descended.config.to_hex(),
        energy_measured: inst.energy(&measured)?,
        energy_before: reference.energy,
        energy_after: descended.energy,
        accepted,
        returned: descended.config == reference.config,
        reference_probability,
        min_gap_seen: None,
        norm_drift: out.norm_drift,
        reference_energy: next.energy,
    };
    Ok((result, next))
}

/// One cycle from scratch; returns the result and the reference for the next
/// cycle (unchanged on rejection).
pub fn run_cycle(inst: &SkInstance, reference: &LocalMinimum, cfg: &CycleConfig) -> Result<(CycleResult, LocalMinimum)> {
    let h = ReferenceHamiltonian::new(inst, &reference.config)?;
    run_cycle_with(inst, &h, reference, cfg)
}

/// New slope after looking at the cycles run since the last adjustment.
pub fn tune_chi(recent: &[CycleResult], chi: f64, policy: &TunerPolicy) -> f64 {
    if !policy.enabled || policy.patience == 0 || recent.len() < policy.patience {
        return chi;
    }
    let window = &recent[recent.len() - policy.patience..];
    if window.iter().all(|c| c.returned) {
        chi * (1.0 + policy.up)
    } else if window.iter().all(|c| c.went_up()) {
        chi * (1.0 - policy.down)
    } else {
        chi
    }
}

/// Classical seeding of the first reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedAnneal {
    pub sweeps: usize,
    pub t_hot: f64,
    pub t_cold: f64,
}

impl Default for SeedAnneal {
    /// A zero-temperature quench: the reference is whatever minimum the start
    /// configuration falls into.
    fn default() -> Self {
        Self { sweeps: 1, t_hot: 0.0, t_cold: 0.0 }
    }
}

/// Options for [`iterate`] beyond the cycle itself.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub anneal: SeedAnneal,
    pub tuner: TunerPolicy,
    /// Known ground-state energy; the run stops once it is reached.
    pub ground_energy: Option<f64>,
    /// Record the step-3 first-dip gap of each cycle's reference (costly).
    pub track_gap: bool,
    /// Recompute `bz_max` whenever the reference changes: from the enumerated
    /// minima when `n <= ENUMERATION_LIMIT`, else `default_bz_max(J, 1)`.
    pub auto_bz_max: bool,
    /// Recompute `tau3` whenever the reference changes.
    pub auto_tau3: Option<Tau3Rule>,
}

/// `tau3 = min(c / gap^2, cap)`, see [`estimate_tau3`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tau3Rule {
    pub c: f64,
    pub cap: f64,
}

/// History of an iterative run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub n: usize,
    pub instance_seed: u64,
    pub initial_reference: String,
    pub initial_energy: f64,
    pub final_reference: String,
    pub final_energy: f64,
    pub cycles: Vec<CycleResult>,
    /// `chi` used by each cycle.
    pub chi_trace: Vec<f64>,
    /// Reference energy entering cycle 0, then after each cycle.
    pub reference_energy_trace: Vec<f64>,
    pub n_cycles: usize,
    /// `n_c (tau1 + tau2 + tau3)` for the slopes actually used.
    pub simulated_time: f64,
    pub wall_clock_secs: f64,
    /// Fraction of cycles that lowered the reference.
    pub acceptance_fraction: f64,
    /// `tau3` of the last cycle run.
    pub tau3: f64,
    /// `tau3` used by each cycle.
    pub tau3_trace: Vec<f64>,
    pub reached_ground_state: Option<bool>,
}

/// Seeds a reference by annealing `start`, then runs up to `budget` cycles.
pub fn iterate(
    inst: &SkInstance,
    start: &SpinConfig,
    cfg0: &CycleConfig,
    budget: usize,
    opts: &RunOptions,
) -> Result<RunRecord> {
    if budget == 0 {
        return invalid("budget must be at least one cycle");
    }
    cfg0.validate()?;
    let clock = Instant::now();
    let a = opts.anneal;
    let mut reference = simulated_anneal(inst, start, a.sweeps, a.t_hot, a.t_cold, derive_seed(cfg0.seed, 0))?;
    let initial = reference.clone();
    let tol = acceptance_tolerance(inst);
    let at_ground = |e: f64| opts.ground_energy.map(|g| e <= g + tol);
    let mut h = ReferenceHamiltonian::new(inst, &reference.config)?;
    let mut cfg = *cfg0;
    let minima = if opts.auto_bz_max && inst.n() <= classical::ENUMERATION_LIMIT {
        Some(classical::enumerate_minima(inst)?)
    } else {
        None
    };
    let adapt = |cfg: &mut CycleConfig, h: &ReferenceHamiltonian, r: &LocalMinimum| -> Result<()> {
        if opts.auto_bz_max {
            cfg.bz_max = match &minima {
                Some(m) => bz_max_from_minima(inst.j_scale(), r, m),
                None => CycleConfig::default_bz_max(inst.j_scale(), 1.0),
            };
        }
        if let Some(rule) = opts.auto_tau3 {
            cfg.tau3 = estimate_tau3(h, cfg.chi, cfg.bz_max, rule.c, rule.cap)?.0;
        }
        cfg.validate()
    };
    adapt(&mut cfg, &h, &reference)?;
    let mut cycles: Vec<CycleResult> = Vec::new();
    let mut trace = vec![reference.energy];
    let mut chi_trace = Vec::new();
    let mut tau3_trace = Vec::new();
    let mut since_adjust = 0usize;
    let mut simulated_time = 0.0;
    while cycles.len() < budget && at_ground(reference.energy) != Some(true) {
        cfg.seed = derive_seed(cfg0.seed, 100 + cycles.len() as u64);
        let (mut result, next) = run_cycle_with(inst, &h, &reference, &cfg)?;
        if opts.track_gap && inst.n() <= crate::quantum::DENSE_LIMIT {
            result.min_gap_seen = Some(ray_gap(&h, cfg.chi, cfg.bz_max)?);
        }
        chi_trace.push(cfg.chi);
        tau3_trace.push(cfg.tau3);
        simulated_time += cfg.cycle_time();
        if result.accepted {
            reference = next;
            h = h.rereference(&reference.config)?;
            adapt(&mut cfg, &h, &reference)?;
            since_adjust = 0;
        } else {
            since_adjust += 1;
        }
        trace.push(reference.energy);
        cycles.push(result);
        let new_chi = tune_chi(&cycles[cycles.len() - since_adjust.min(cycles.len())..], cfg.chi, &opts.tuner);
        if new_chi != cfg.chi {
            cfg.chi = new_chi;
            since_adjust = 0;
        }
    }
    let accepted = cycles.iter().filter(|c| c.accepted).count();
    Ok(RunRecord {
        n: inst.n(),
        instance_seed: inst.seed(),
        initial_reference: initial.config.to_hex(),
        initial_energy: initial.energy,
        final_reference: reference.config.to_hex(),
        final_energy: reference.energy,
        n_cycles: cycles.len(),
        acceptance_fraction: if cycles.is_empty() { 0.0 } else { accepted as f64 / cycles.len() as f64 },
        cycles,
        chi_trace,
        reference_energy_trace: trace,
        simulated_time,
        wall_clock_secs: clock.elapsed().as_secs_f64(),
        tau3: tau3_trace.last().copied().unwrap_or(cfg.tau3),
        tau3_trace,
        reached_ground_state: at_ground(reference.energy),
    })
}

/// Refined first-dip gap on 48 nodes from `bz_max` down.
fn ray_gap(h: &ReferenceHamiltonian, chi: f64, bz_max: f64) -> Result<f64> {
    const NODES: usize = 48;
    let grid: Vec<f64> = (0..NODES).map(|i| bz_max * (1.0 - i as f64 / NODES as f64)).collect();
    let opts = GapOptions { search: GapSearch::FirstDip, refine: true, mode: SpectrumMode::LowK(2) };
    Ok(gap_scan(h, chi, &grid, opts)?.gap)
}

/// Step-3 duration `c / Δ²` from the first-dip gap along the ray, capped at
/// `cap`. Returns `(tau3, gap)`.
pub fn estimate_tau3(h: &ReferenceHamiltonian, chi: f64, bz_max: f64, c: f64, cap: f64) -> Result<(f64, f64)> {
    if !(c > 0.0 && cap > 0.0 && bz_max > 0.0) {
        return invalid("tau3 estimate needs positive c, cap and bz_max");
    }
    let gap = ray_gap(h, chi, bz_max)?;
    let tau3 = if gap > 0.0 { (c / (gap * gap)).min(cap) } else { cap };
    Ok((tau3, gap))
}

/// Largest field at which a lower minimum still crosses the reference at
/// `B_x = 0`: `max_l (E_r - E_l) / (n (1 - m_l))` over minima below `E_r`.
pub fn classical_critical_field(reference: &LocalMinimum, minima: &[LocalMinimum]) -> f64 {
    let n = reference.config.len() as f64;
    minima
        .iter()
        .filter(|m| m.energy < reference.energy)
        .filter_map(|m| {
            let d = crate::sk::hamming(&m.config, &reference.config).ok()?;
            let slope_gap = 2.0 * d as f64 / n;
            (slope_gap > 0.0).then(|| (reference.energy - m.energy) / (n * slope_gap))
        })
        .fold(0.0, f64::max)
}

/// `bz_max` for a reference from the exhaustive minima (desk-scale only).
pub fn desk_bz_max(inst: &SkInstance, reference: &LocalMinimum) -> Result<f64> {
    let minima = classical::enumerate_minima(inst)?;
    Ok(bz_max_from_minima(inst.j_scale(), reference, &minima))
}

fn bz_max_from_minima(j_scale: f64, reference: &LocalMinimum, minima: &[LocalMinimum]) -> f64 {
    let max_other = minima
        .iter()
        .filter(|m| m.config != reference.config)
        .filter_map(|m| crate::sk::overlap_slope(&m.config, &reference.config).ok())
        .fold(f64::NEG_INFINITY, f64::max);
    CycleConfig::default_bz_max(j_scale, max_other)
}

/// Summary written next to the JSON-lines log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_energy: f64,
    pub final_per_spin_energy: f64,
    pub final_reference: String,
    pub n_cycles: usize,
    pub acceptance_fraction: f64,
    pub simulated_time: f64,
    pub tau3: f64,
    pub chi_trace: Vec<f64>,
    pub reached_ground_state: Option<bool>,
}

impl RunRecord {
    pub fn summary(&self, j_scale: f64) -> RunSummary {
        RunSummary {
            final_energy: self.final_energy,
            final_per_spin_energy: self.final_energy / (self.n as f64 * j_scale),
            final_reference: self.final_reference.clone(),
            n_cycles: self.n_cycles,
            acceptance_fraction: self.acceptance_fraction,
            simulated_time: self.simulated_time,
            tau3: self.tau3,
            chi_trace: self.chi_trace.clone(),
            reached_ground_state: self.reached_ground_state,
        }
    }

    /// One JSON object per cycle.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for c in &self.cycles {
            serde_json::to_writer(&mut out, c)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(returned: bool, before: f64, after: f64) -> CycleResult {
        CycleResult {
            chi: 1.0,
            measured: String::new(),
            descended: String::new(),
            energy_measured: after,
            energy_before: before,
            energy_after: after,
            accepted: after < before,
            returned,
            reference_probability: 0.0,
            min_gap_seen: None,
            norm_drift: 0.0,
            reference_energy: before.min(after),
        }
    }

    #[test]
    fn tuner_raises_after_self_returns() {
        let p = TunerPolicy::default();
        let h = vec![result(true, -5.0, -5.0); 3];
        assert!((tune_chi(&h, 2.0, &p) - 2.1).abs() < 1e-12);
        assert_eq!(tune_chi(&h[..2], 2.0, &p), 2.0);
    }

    #[test]
    fn tuner_lowers_after_higher_minima() {
        let p = TunerPolicy::default();
        let h = vec![result(false, -5.0, -4.0); 3];
        assert!((tune_chi(&h, 2.0, &p) - 1.9).abs() < 1e-12);
    }

    #[test]
    fn tuner_ignores_mixed_or_accepted() {
        let p = TunerPolicy::default();
        assert_eq!(tune_chi(&[result(false, -5.0, -6.0)], 2.0, &p), 2.0);
        let mixed = vec![result(true, -5.0, -5.0), result(false, -5.0, -4.0), result(true, -5.0, -5.0)];
        assert_eq!(tune_chi(&mixed, 2.0, &p), 2.0);
        let h = vec![result(true, -5.0, -5.0); 3];
        assert_eq!(tune_chi(&h, 2.0, &TunerPolicy::disabled()), 2.0);
    }

    #[test]
    fn config_validation() {
        let mut c = CycleConfig::default();
        assert!(c.validate().is_ok());
        c.tau3 = 0.0;
        assert!(c.validate().is_err());
        assert!((CycleConfig::default_bz_max(1.0, 0.6) - 3.2).abs() < 1e-12);
    }

    #[test]
    fn zero_budget_rejected() {
        let inst = SkInstance::generate(4, 1.0, 0).unwrap();
        let start = SpinConfig::all_up(4);
        assert!(iterate(&inst, &start, &CycleConfig::default(), 0, &RunOptions::default()).is_err());
    }

    #[test]
    fn rejection_keeps_reference() {
        let inst = SkInstance::generate(6, 1.0, 3).unwrap();
        let minima = classical::enumerate_minima(&inst).unwrap();
        let reference = minima.last().unwrap().clone();
        let cfg = CycleConfig { chi: 0.05, tau2: 2.0, tau3: 2.0, ..CycleConfig::default() };
        for seed in 0..5 {
            let (r, next) = run_cycle(&inst, &reference, &CycleConfig { seed, ..cfg }).unwrap();
            assert_eq!(r.accepted, r.energy_after < r.energy_before - acceptance_tolerance(&inst));
            if !r.accepted {
                assert_eq!(next, reference);
            }
        }
    }

    #[test]
    fn critical_field_of_two_lines() {
        let inst = SkInstance::generate(6, 1.0, 1).unwrap();
        let minima = classical::enumerate_minima(&inst).unwrap();
        let top = minima.last().unwrap();
        let bzc = classical_critical_field(top, &minima);
        // Past the critical field the reference line is lowest among minima.
        let n = 6.0;
        for m in &minima {
            let slope = crate::sk::overlap_slope(&m.config, &top.config).unwrap();
            assert!(m.energy - n * slope * (bzc + 1e-9) >= top.energy - n * (bzc + 1e-9) - 1e-9);
        }
        assert_eq!(classical_critical_field(&minima[0], &minima), 0.0);
    }
}
