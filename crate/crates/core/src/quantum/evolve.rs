//! Time evolution along piecewise-linear field schedules and projective
//! measurement.
//!
//! The propagator is the second-order Strang splitting
//! `e^{-i D dt/2} e^{-i X dt} e^{-i D dt/2}` with the diagonal part `D`
//! (classical energy plus reference field) and the transverse part
//! `X = -B_x Σ σ^x` both evaluated at the step midpoint. `e^{-i X dt}`
//! factorizes into one exact rotation per qubit, so each factor is unitary
//! and the norm is conserved up to rounding.

use rand::Rng;

use super::{FieldPoint, QuantumState, ReferenceHamiltonian, C64};
use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::sk::SpinConfig;

/// Linear ramp from `from` to `to` over `duration`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub from: FieldPoint,
    pub to: FieldPoint,
    pub duration: f64,
}

impl Segment {
    pub fn new(from: FieldPoint, to: FieldPoint, duration: f64) -> Self {
        Self { from, to, duration }
    }

    pub fn hold(at: FieldPoint, duration: f64) -> Self {
        Self { from: at, to: at, duration }
    }
}

/// Result of [`evolve`].
#[derive(Clone, Debug)]
pub struct Evolution {
    pub state: QuantumState,
    /// `| ||ψ|| - 1 |` before the final renormalization.
    pub norm_drift: f64,
    pub steps: usize,
    pub elapsed: f64,
}

/// Integrates `i dψ/dt = H(t) ψ` through `schedule`, with each segment split
/// into equal steps no longer than `dt_max`.
pub fn evolve(
    h: &ReferenceHamiltonian,
    schedule: &[Segment],
    v0: &QuantumState,
    dt_max: f64,
) -> Result<Evolution> {
    if !(dt_max.is_finite() && dt_max > 0.0) {
        return invalid(format!("dt_max must be positive, got {dt_max}"));
    }
    if v0.n() != h.n() {
        return invalid(format!("state has {} qubits, Hamiltonian has {}", v0.n(), h.n()));
    }
    if (v0.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!("initial state norm {}", v0.norm())));
    }
    for s in schedule {
        if !(s.duration.is_finite() && s.duration > 0.0) {
            return invalid(format!("segment duration must be positive, got {}", s.duration));
        }
        FieldPoint::new(s.from.bz, s.from.bx)?;
        FieldPoint::new(s.to.bz, s.to.bx)?;
    }
    let n = h.n();
    let mut psi: Vec<C64> = v0.amplitudes().to_vec();
    let mut steps = 0;
    let mut elapsed = 0.0;
    // Alignment index `(n + alignment) / 2` lies in 0..=n.
    let zidx: Vec<usize> = h.alignment().iter().map(|&z| ((n as i32 + z) / 2) as usize).collect();
    for seg in schedule {
        let count = (seg.duration / dt_max).ceil().max(1.0) as usize;
        let dt = seg.duration / count as f64;
        let half_energy: Vec<C64> = h
            .sk_energies()
            .iter()
            .map(|&e| C64::from_polar(1.0, -e * dt / 2.0))
            .collect();
        for step in 0..count {
            let f = seg.from.lerp(seg.to, (step as f64 + 0.5) / count as f64);
            // e^{+i bz z dt/2} for each alignment value z = 2q - n.
            let half_zeeman: Vec<C64> = (0..=n)
                .map(|q| C64::from_polar(1.0, f.bz * (2 * q) as f64 * dt / 2.0 - f.bz * n as f64 * dt / 2.0))
                .collect();
            apply_diagonal(&mut psi, &half_energy, &half_zeeman, &zidx);
            if f.bx != 0.0 {
                apply_transverse(&mut psi, n, f.bx * dt);
            }
            apply_diagonal(&mut psi, &half_energy, &half_zeeman, &zidx);
            steps += 1;
        }
        elapsed += seg.duration;
    }
    let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let drift = (norm - 1.0).abs();
    psi.iter_mut().for_each(|a| *a /= norm);
    Ok(Evolution { state: QuantumState::from_raw(n, psi), norm_drift: drift, steps, elapsed })
}

fn apply_diagonal(psi: &mut [C64], energy: &[C64], zeeman: &[C64], zidx: &[usize]) {
    for ((a, e), &z) in psi.iter_mut().zip(energy).zip(zidx) {
        *a *= e * zeeman[z];
    }
}

/// `e^{+i θ Σ_k σ^x_k}` as a product of single-qubit rotations.
fn apply_transverse(psi: &mut [C64], n: usize, theta: f64) {
    let c = theta.cos();
    let is = C64::new(0.0, theta.sin());
    for k in 0..n {
        let bit = 1usize << k;
        for a in 0..psi.len() {
            if a & bit == 0 {
                let (x, y) = (psi[a], psi[a | bit]);
                psi[a] = x * c + y * is;
                psi[a | bit] = y * c + x * is;
            }
        }
    }
}

/// Samples one basis state with probability `|amplitude|²`.
pub fn measure(v: &QuantumState, seed: u64) -> Result<SpinConfig> {
    let mut rng = rng::stream(seed);
    measure_with(v, &mut rng)
}

pub(crate) fn measure_with<R: Rng + ?Sized>(v: &QuantumState, rng: &mut R) -> Result<SpinConfig> {
    let probs = v.probabilities();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidState(format!("state norm² is {total}, expected 1")));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (a, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_nonzero = a;
        }
        acc += p;
        if u < acc {
            return Ok(SpinConfig::from_index(v.n(), a as u64));
        }
    }
    Ok(SpinConfig::from_index(v.n(), last_nonzero as u64))
}

/// Histogram of `shots` measurements.
pub fn sample_counts(v: &QuantumState, shots: usize, seed: u64) -> Result<Vec<u64>> {
    let mut rng = rng::stream(seed);
    let mut counts = vec![0u64; v.dim()];
    for _ in 0..shots {
        counts[measure_with(v, &mut rng)?.index() as usize] += 1;
    }
    Ok(counts)
}
