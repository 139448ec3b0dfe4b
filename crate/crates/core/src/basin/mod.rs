//! Phenomenological model of isolated local minima.
//!
//! Each minimum `l` is a level `Ẽ_l(B_z, B_x) = E_l + Σ_l(B_z, B_x)` with
//!
//! `Σ_l = N J [f_l - sqrt((f_l + m_l B_z / J)² + (B_x / J)²)]`,
//!
//! where `m_l = 1 - 2 d_l / N` is the overlap with the reference and `f_l`
//! sets the level repulsion from the minimum's single-flip neighbourhood.
//! Ensembles of such curves stand in for the low-energy spectrum of large
//! systems; counting how many cross the reference along a step-3 ray gives
//! the higher/lower crossing ratio.
//!
//! The model's `J` is the single-count energy unit. Instance energies sum
//! over ordered pairs, so an instance with coupling scale `J` maps onto the
//! model with `J_m = 2J` (see [`model_unit`]).

mod crossings;
mod fit;
mod sweep;

pub use crossings::{
    auto_bz_hi, count_crossings, critical_field, phase_boundary, write_phase_csv, CrossingCounts,
    DEFAULT_GRID,
};
pub use fit::{fit_exponents, synthetic_table, FitPoint, FitResult};
pub use sweep::{ratio_sweep, write_sweep_csv, SweepRow};

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::classical::enumerate_minima;
use crate::error::{invalid, Result};
use crate::rng;
use crate::sk::SkInstance;

/// Model energy unit for an instance with coupling scale `j_scale`.
pub fn model_unit(j_scale: f64) -> f64 {
    2.0 * j_scale
}

/// Large-`N` ground-state energy per spin in model units.
pub const EPS_GS_LARGE_N: f64 = -0.7633;

/// One isolated-minimum curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinCurve {
    /// Classical energy `E_l`.
    pub e_l: f64,
    /// Overlap with the reference, `1 - 2 d / N`.
    pub m_l: f64,
    /// Repulsion parameter in `(0, 1)`.
    pub f_l: f64,
}

impl BasinCurve {
    pub fn new(e_l: f64, m_l: f64, f_l: f64) -> Result<Self> {
        if !e_l.is_finite() {
            return invalid(format!("curve energy must be finite, got {e_l}"));
        }
        if !(-1.0..=1.0).contains(&m_l) {
            return invalid(format!("overlap must lie in [-1, 1], got {m_l}"));
        }
        if !(f_l > 0.0 && f_l < 1.0) {
            return invalid(format!("f must lie in (0, 1), got {f_l}"));
        }
        Ok(Self { e_l, m_l, f_l })
    }

    /// Curve at Hamming distance `d` from the reference in an `n`-spin system.
    pub fn at_distance(e_l: f64, d: usize, n: usize, f_l: f64) -> Result<Self> {
        if d > n || n == 0 {
            return invalid(format!("distance {d} outside [0, {n}]"));
        }
        Self::new(e_l, 1.0 - 2.0 * d as f64 / n as f64, f_l)
    }

    /// `Ẽ_l = E_l + Σ_l` at `(bz, bx)`.
    #[inline]
    pub fn level(&self, n: usize, j: f64, bz: f64, bx: f64) -> f64 {
        self.e_l + self_energy(self, n, j, bz, bx)
    }
}

/// `Σ = N J [f - sqrt((f + m bz / J)² + (bx / J)²)]`.
#[inline]
pub fn self_energy(c: &BasinCurve, n: usize, j: f64, bz: f64, bx: f64) -> f64 {
    let z = c.f_l + c.m_l * bz / j;
    let x = bx / j;
    n as f64 * j * (c.f_l - z.hypot(x))
}

/// Where curve energies `E_l` come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EnergySampler {
    /// `E_l = N J ε` with `ε ~ N(mean, sd²)`.
    Gaussian { mean: f64, sd: f64 },
    /// `ε` uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// `ε` resampled from a list of observed per-spin minimum energies.
    Empirical(Vec<f64>),
}

impl EnergySampler {
    fn validate(&self) -> Result<()> {
        match self {
            EnergySampler::Gaussian { mean, sd } if mean.is_finite() && sd.is_finite() && *sd >= 0.0 => Ok(()),
            EnergySampler::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(()),
            EnergySampler::Empirical(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(()),
            other => invalid(format!("invalid energy sampler {other:?}")),
        }
    }

    /// One per-spin energy `ε`.
    pub fn sample_per_spin<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EnergySampler::Gaussian { mean, sd } => {
                if *sd == 0.0 {
                    *mean
                } else {
                    Normal::new(*mean, *sd).expect("validated").sample(rng)
                }
            }
            EnergySampler::Uniform { lo, hi } => {
                if lo == hi {
                    *lo
                } else {
                    rng.random_range(*lo..=*hi)
                }
            }
            EnergySampler::Empirical(v) => v[rng.random_range(0..v.len())],
        }
    }

    /// Gaussian fitted to the per-spin energies (model units) of every local
    /// minimum of `instances` random instances of size `n` (exhaustive,
    /// `n <= 20`).
    pub fn calibrate(n: usize, instances: usize, j_scale: f64, seed: u64) -> Result<Self> {
        let eps = calibration_energies(n, instances, j_scale, seed)?;
        let mean = eps.iter().sum::<f64>() / eps.len() as f64;
        let var = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (eps.len().max(2) - 1) as f64;
        Ok(EnergySampler::Gaussian { mean, sd: var.sqrt() })
    }
}

/// Per-spin energies `E / (n J_m)` of all minima of `instances` random
/// instances.
pub fn calibration_energies(n: usize, instances: usize, j_scale: f64, seed: u64) -> Result<Vec<f64>> {
    if instances == 0 {
        return invalid("calibration needs at least one instance");
    }
    let mut eps = Vec::new();
    for k in 0..instances {
        let inst = SkInstance::generate(n, j_scale, rng::derive_seed(seed, k as u64))?;
        let unit = n as f64 * model_unit(j_scale);
        eps.extend(enumerate_minima(&inst)?.into_iter().map(|m| m.energy / unit));
    }
    Ok(eps)
}

/// A reference curve together with a population of other minima.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinEnsemble {
    pub n: usize,
    pub j_scale: f64,
    /// Always `m = 1`.
    pub reference: BasinCurve,
    pub curves: Vec<BasinCurve>,
    pub seed: u64,
}

impl BasinEnsemble {
    pub fn new(n: usize, j_scale: f64, reference: BasinCurve, curves: Vec<BasinCurve>, seed: u64) -> Result<Self> {
        if reference.m_l != 1.0 {
            return invalid(format!("reference overlap must be 1, got {}", reference.m_l));
        }
        if curves.is_empty() {
            return invalid("ensemble needs at least one curve");
        }
        if n == 0 || !(j_scale > 0.0 && j_scale.is_finite()) {
            return invalid("ensemble needs n >= 1 and j_scale > 0");
        }
        Ok(Self { n, j_scale, reference, curves, seed })
    }

    /// Per-spin reference energy `ε_r`.
    pub fn eps_r(&self) -> f64 {
        self.reference.e_l / (self.n as f64 * self.j_scale)
    }
}

/// Samples `n_curves` curves with `d ~ Binomial(n, 1/2)`, `f ~ U(1/4, 3/4)`
/// and `E_l` from `energy`, all independent. The reference sits at per-spin
/// energy `eps_r` with its own `f` drawn from the same box.
pub fn sample_ensemble(
    n: usize,
    n_curves: usize,
    energy: &EnergySampler,
    eps_r: f64,
    j_scale: f64,
    seed: u64,
) -> Result<BasinEnsemble> {
    if n_curves == 0 {
        return invalid("ensemble needs at least one curve");
    }
    if n == 0 || !(j_scale > 0.0 && j_scale.is_finite()) || !eps_r.is_finite() {
        return invalid("ensemble needs n >= 1, j_scale > 0 and finite eps_r");
    }
    energy.validate()?;
    let mut rng = rng::stream(seed);
    let box_f = Uniform::new(0.25, 0.75).expect("non-empty box");
    let binom = Binomial::new(n as u64, 0.5).expect("valid binomial");
    let scale = n as f64 * j_scale;
    let reference = BasinCurve { e_l: eps_r * scale, m_l: 1.0, f_l: box_f.sample(&mut rng) };
    let curves = (0..n_curves)
        .map(|_| {
            let d = binom.sample(&mut rng) as usize;
            let f_l = box_f.sample(&mut rng);
            let e_l = energy.sample_per_spin(&mut rng) * scale;
            BasinCurve { e_l, m_l: 1.0 - 2.0 * d as f64 / n as f64, f_l }
        })
        .collect();
    BasinEnsemble::new(n, j_scale, reference, curves, seed)
}
