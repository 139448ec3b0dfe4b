#![allow(dead_code)]

use iqo::classical::enumerate_minima;
use iqo::quantum::{sample_counts, QuantumState};
use iqo::rng;
use iqo::sk::{LocalMinimum, SkInstance};
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Haar-like random state from i.i.d. complex Gaussian amplitudes.
pub fn random_state(n: usize, seed: u64) -> QuantumState {
    let mut rng = rng::stream(seed);
    let amps = (0..1usize << n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    QuantumState::from_amplitudes(amps).unwrap()
}

/// Pearson chi-square p-value of `shots` measurements against `|ψ|²`.
pub fn born_p_value(state: &QuantumState, shots: usize, seed: u64) -> f64 {
    let counts = sample_counts(state, shots, seed).unwrap();
    let probs = state.probabilities();
    let stat: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&c, &p)| {
            let e = p * shots as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (probs.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Highest-energy local minimum that is not a ground state, if any.
pub fn excited_reference(inst: &SkInstance) -> Option<LocalMinimum> {
    let minima = enumerate_minima(inst).unwrap();
    let gs = minima[0].energy;
    minima.into_iter().rev().find(|m| m.energy > gs + 1e-9)
}

/// Descending grid of `nodes` points from `hi` to `lo`.
pub fn descending(hi: f64, lo: f64, nodes: usize) -> Vec<f64> {
    (0..nodes).map(|i| hi - (hi - lo) * i as f64 / (nodes - 1) as f64).collect()
}
