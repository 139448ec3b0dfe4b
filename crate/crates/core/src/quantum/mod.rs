//! Exact treatment of the reference-field Hamiltonian
//!
//! `H = H_SK - B_z Σ_i s_i^r σ^z_i - B_x Σ_i σ^x_i`
//!
//! on the full `2^n` bit-string basis. Basis index bit `i` is spin `i`, with a
//! clear bit meaning `s_i = +1`. The diagonal is stored once; the transverse
//! field couples each basis state to its `n` single-flip neighbours, so the
//! action of `H` is computed matrix-free.

mod evolve;
mod spectrum;
mod state;

pub use evolve::{evolve, measure, sample_counts, Evolution, Segment};
pub use spectrum::{
    full_spectrum, gap_scan, isolate_basins, low_spectrum, min_gap_along_ray, spectrum,
    write_spectrum_csv, GapOptions, GapResult, GapSearch, IsolatedLevel, SpectrumMode,
    SpectrumSlice, DENSE_LIMIT,
};
pub use state::QuantumState;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sk::{SkInstance, SpinConfig};

pub type C64 = Complex64;

/// Largest spin count the state-vector machinery accepts.
pub const STATE_LIMIT: usize = 26;

/// Longitudinal (`bz`, along the reference) and transverse (`bx`) fields, in
/// units of `J`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    pub bz: f64,
    pub bx: f64,
}

impl FieldPoint {
    pub fn new(bz: f64, bx: f64) -> Result<Self> {
        if !(bz.is_finite() && bx.is_finite() && bz >= 0.0 && bx >= 0.0) {
            return invalid(format!("fields must be finite and non-negative, got ({bz}, {bx})"));
        }
        Ok(Self { bz, bx })
    }

    /// Point `(bz, chi * bz)` on a step-3 ray.
    pub fn on_ray(chi: f64, bz: f64) -> Self {
        Self { bz, bx: chi * bz }
    }

    pub fn lerp(self, other: Self, t: f64) -> Self {
        Self {
            bz: self.bz + (other.bz - self.bz) * t,
            bx: self.bx + (other.bx - self.bx) * t,
        }
    }
}

/// `H_SK + B_z H_ref + B_x H_q` for one instance and reference state, with
/// the field-independent parts of the diagonal precomputed.
#[derive(Clone, Debug)]
pub struct ReferenceHamiltonian {
    n: usize,
    reference: SpinConfig,
    energies: Vec<f64>,
    /// `Σ_i s_i^r s_i^α = n - 2 d(α, r)`.
    alignment: Vec<i32>,
}

impl ReferenceHamiltonian {
    pub fn new(inst: &SkInstance, reference: &SpinConfig) -> Result<Self> {
        let n = inst.n();
        if reference.len() != n {
            return invalid(format!("reference has {} spins, instance has {n}", reference.len()));
        }
        if n > STATE_LIMIT {
            return Err(Error::ResourceLimit(format!(
                "state vector needs n <= {STATE_LIMIT}, got {n}"
            )));
        }
        let energies = inst.all_energies()?;
        let r = reference.index();
        let alignment = (0..energies.len() as u64)
            .map(|a| n as i32 - 2 * (a ^ r).count_ones() as i32)
            .collect();
        Ok(Self { n, reference: reference.clone(), energies, alignment })
    }

    /// Same instance with a new reference state; reuses the classical
    /// energies.
    pub fn rereference(&self, reference: &SpinConfig) -> Result<Self> {
        if reference.len() != self.n {
            return invalid(format!("reference has {} spins, expected {}", reference.len(), self.n));
        }
        let r = reference.index();
        let alignment = (0..self.dim() as u64)
            .map(|a| self.n as i32 - 2 * (a ^ r).count_ones() as i32)
            .collect();
        Ok(Self {
            n: self.n,
            reference: reference.clone(),
            energies: self.energies.clone(),
            alignment,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn reference(&self) -> &SpinConfig {
        &self.reference
    }

    /// Classical energies `E_α` of all basis states.
    pub fn sk_energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn alignment(&self) -> &[i32] {
        &self.alignment
    }

    /// `E_α - B_z Σ_i s_i^r s_i^α`.
    #[inline]
    pub fn diagonal_entry(&self, a: usize, bz: f64) -> f64 {
        self.energies[a] - bz * self.alignment[a] as f64
    }

    pub fn diagonal(&self, bz: f64) -> Vec<f64> {
        (0..self.dim()).map(|a| self.diagonal_entry(a, bz)).collect()
    }

    /// `out = H v` for real vectors.
    pub fn apply_real(&self, f: FieldPoint, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim());
        for (a, o) in out.iter_mut().enumerate() {
            let mut acc = self.diagonal_entry(a, f.bz) * v[a];
            if f.bx != 0.0 {
                let mut flips = 0.0;
                for k in 0..self.n {
                    flips += v[a ^ (1 << k)];
                }
                acc -= f.bx * flips;
            }
            *o = acc;
        }
    }

    /// `H v` for complex vectors.
    pub fn apply(&self, f: FieldPoint, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim(), "vector length must be 2^n");
        (0..self.dim())
            .map(|a| {
                let mut acc = v[a] * self.diagonal_entry(a, f.bz);
                if f.bx != 0.0 {
                    let mut flips = C64::new(0.0, 0.0);
                    for k in 0..self.n {
                        flips += v[a ^ (1 << k)];
                    }
                    acc -= flips * f.bx;
                }
                acc
            })
            .collect()
    }

    /// Dense matrix, restricted to `basis` when given (couplings leaving the
    /// subset are dropped).
    pub fn dense(&self, f: FieldPoint, basis: Option<&[usize]>) -> nalgebra::DMatrix<f64> {
        let all: Vec<usize>;
        let basis = match basis {
            Some(b) => b,
            None => {
                all = (0..self.dim()).collect();
                &all
            }
        };
        let m = basis.len();
        let mut pos = std::collections::HashMap::with_capacity(m);
        for (i, &a) in basis.iter().enumerate() {
            pos.insert(a, i);
        }
        let mut h = nalgebra::DMatrix::zeros(m, m);
        for (i, &a) in basis.iter().enumerate() {
            h[(i, i)] = self.diagonal_entry(a, f.bz);
            if f.bx != 0.0 {
                for k in 0..self.n {
                    if let Some(&j) = pos.get(&(a ^ (1 << k))) {
                        h[(i, j)] = -f.bx;
                    }
                }
            }
        }
        h
    }
}

/// `H v` for one instance, reference and field point.
pub fn apply_h(
    inst: &SkInstance,
    reference: &SpinConfig,
    f: FieldPoint,
    v: &QuantumState,
) -> Result<Vec<C64>> {
    let h = ReferenceHamiltonian::new(inst, reference)?;
    if v.n() != h.n() {
        return invalid(format!("state has {} qubits, instance has {}", v.n(), h.n()));
    }
    Ok(h.apply(f, v.amplitudes()))
}
