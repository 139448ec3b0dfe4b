use std::io::{Read, Write};

use super::{C64, STATE_LIMIT};
use crate::error::{invalid, Error, Result};

/// Normalized amplitude vector over the `2^n` bit-string basis.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    n: usize,
    amps: Vec<C64>,
}

impl QuantumState {
    /// Basis state `|index⟩`.
    pub fn basis(n: usize, index: u64) -> Self {
        assert!(n <= STATE_LIMIT, "n = {n} exceeds state limit");
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[index as usize] = C64::new(1.0, 0.0);
        Self { n, amps }
    }

    /// Equal-weight superposition of all basis states.
    pub fn uniform(n: usize) -> Self {
        let dim = 1usize << n;
        let a = 1.0 / (dim as f64).sqrt();
        Self { n, amps: vec![C64::new(a, 0.0); dim] }
    }

    /// Wraps `amps` after normalizing it. The length must be a power of two.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return invalid(format!("amplitude vector length {dim} is not 2^n"));
        }
        let n = dim.trailing_zeros() as usize;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState(format!("cannot normalize vector of norm {norm}")));
        }
        Ok(Self { n, amps: amps.into_iter().map(|a| a / norm).collect() })
    }

    /// Wraps `amps` without renormalizing.
    pub(crate) fn from_raw(n: usize, amps: Vec<C64>) -> Self {
        Self { n, amps }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Little-endian snapshot: `u64` qubit count, then `(re, im)` pairs.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.n as u64).to_le_bytes())?;
        for a in &self.amps {
            out.write_all(&a.re.to_le_bytes())?;
            out.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut input: R) -> Result<Self> {
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        if n > STATE_LIMIT {
            return Err(Error::Parse(format!("snapshot header n = {n} exceeds limit")));
        }
        let mut amps = Vec::with_capacity(1 << n);
        for _ in 0..1usize << n {
            input.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            input.read_exact(&mut word)?;
            let im = f64::from_le_bytes(word);
            amps.push(C64::new(re, im));
        }
        Ok(Self { n, amps })
    }
}
