//! Sherrington–Kirkpatrick instances, spin configurations and classical
//! energies.
//!
//! Energies use the ordered-pair double sum `E = Σ_i Σ_j J_ij s_i s_j`, which
//! counts every bond twice (`E = 2 Σ_{i<j} J_ij s_i s_j`). Per-spin energies
//! `ε = E / (N J)` are quoted on that same scale, so the large-N ground-state
//! density is about `-1.53` rather than the `-0.763` of the single-count
//! convention.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;

/// One SK optimization task: a dense symmetric coupling matrix with zero
/// diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SkInstance {
    n: usize,
    j_scale: f64,
    seed: u64,
    /// Row-major `n × n`.
    couplings: Vec<f64>,
}

impl SkInstance {
    /// Draws `J_ij ~ N(0, j_scale² / n)` for `i < j` in row-major order and
    /// mirrors them.
    pub fn generate(n: usize, j_scale: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return invalid(format!("instance needs n >= 2, got {n}"));
        }
        if !(j_scale.is_finite() && j_scale > 0.0) {
            return invalid(format!("j_scale must be positive, got {j_scale}"));
        }
        let sd = j_scale / (n as f64).sqrt();
        let mut rng = rng::stream(seed);
        let mut couplings = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let z: f64 = rng.sample(StandardNormal);
                couplings[i * n + j] = sd * z;
                couplings[j * n + i] = sd * z;
            }
        }
        Ok(Self { n, j_scale, seed, couplings })
    }

    /// Builds an instance from an explicit matrix, checking symmetry and the
    /// zero diagonal.
    pub fn from_matrix(rows: &[Vec<f64>], j_scale: f64, seed: u64) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return invalid(format!("instance needs n >= 2, got {n}"));
        }
        let mut couplings = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return invalid(format!("row {i} has length {}, expected {n}", row.len()));
            }
            couplings.extend_from_slice(row);
        }
        let inst = Self { n, j_scale, seed, couplings };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        if !(self.j_scale.is_finite() && self.j_scale > 0.0) {
            return invalid(format!("j_scale must be positive, got {}", self.j_scale));
        }
        for i in 0..self.n {
            if self.coupling(i, i) != 0.0 {
                return invalid(format!("nonzero diagonal at {i}"));
            }
            for j in 0..i {
                let (a, b) = (self.coupling(i, j), self.coupling(j, i));
                if !a.is_finite() || a != b {
                    return invalid(format!("asymmetric or non-finite coupling at ({i},{j})"));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j_scale(&self) -> f64 {
        self.j_scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.couplings[i * self.n..(i + 1) * self.n]
    }

    /// Strict lower triangle, row-major: `(1,0), (2,0), (2,1), (3,0), …`.
    pub fn lower_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 1..self.n {
            out.extend_from_slice(&self.row(i)[..i]);
        }
        out
    }

    fn check_len(&self, c: &SpinConfig) -> Result<()> {
        if c.len() != self.n {
            return invalid(format!("config has {} spins, instance has {}", c.len(), self.n));
        }
        Ok(())
    }

    /// `Σ_i Σ_j J_ij s_i s_j`.
    pub fn energy(&self, c: &SpinConfig) -> Result<f64> {
        self.check_len(c)?;
        Ok(self.energy_unchecked(c))
    }

    pub(crate) fn energy_unchecked(&self, c: &SpinConfig) -> f64 {
        let s = c.to_f64();
        (0..self.n)
            .map(|i| s[i] * self.row(i).iter().zip(&s).map(|(j, sj)| j * sj).sum::<f64>())
            .sum()
    }

    /// Local field `h_i = Σ_j J_ij s_j`.
    pub fn local_field(&self, c: &SpinConfig, site: usize) -> f64 {
        self.row(site)
            .iter()
            .enumerate()
            .map(|(j, &jij)| jij * c.spin_f64(j))
            .sum()
    }

    /// Energy change from flipping `site`: `-4 s_site h_site`.
    pub fn energy_delta(&self, c: &SpinConfig, site: usize) -> Result<f64> {
        self.check_len(c)?;
        if site >= self.n {
            return invalid(format!("site {site} out of range for n = {}", self.n));
        }
        Ok(self.delta_unchecked(c, site))
    }

    #[inline]
    pub(crate) fn delta_unchecked(&self, c: &SpinConfig, site: usize) -> f64 {
        -4.0 * c.spin_f64(site) * self.local_field(c, site)
    }

    /// All single-flip deltas at once.
    pub fn flip_deltas(&self, c: &SpinConfig) -> Result<Vec<f64>> {
        self.check_len(c)?;
        Ok((0..self.n).map(|k| self.delta_unchecked(c, k)).collect())
    }

    /// Wraps `c` as a [`LocalMinimum`] if every single flip strictly raises
    /// the energy.
    pub fn local_minimum(&self, c: SpinConfig) -> Result<LocalMinimum> {
        self.check_len(&c)?;
        if !self.is_single_flip_stable(&c) {
            return invalid("configuration is not single-flip stable");
        }
        Ok(self.minimum_unchecked(c))
    }

    pub fn is_single_flip_stable(&self, c: &SpinConfig) -> bool {
        c.len() == self.n && (0..self.n).all(|k| self.delta_unchecked(c, k) > 0.0)
    }

    pub(crate) fn minimum_unchecked(&self, c: SpinConfig) -> LocalMinimum {
        let energy = self.energy_unchecked(&c);
        LocalMinimum {
            per_spin_energy: energy / (self.n as f64 * self.j_scale),
            energy,
            config: c,
        }
    }

    /// Classical energies of all `2^n` basis states indexed by bit-string,
    /// visited in Gray-code order so each step costs `O(n)`.
    pub fn all_energies(&self) -> Result<Vec<f64>> {
        if self.n > 30 {
            return Err(Error::ResourceLimit(format!("2^{} energies", self.n)));
        }
        let dim = 1usize << self.n;
        let mut out = vec![0.0; dim];
        let mut c = SpinConfig::all_up(self.n);
        let mut e = self.energy_unchecked(&c);
        out[0] = e;
        for k in 1..dim {
            let site = k.trailing_zeros() as usize;
            e += self.delta_unchecked(&c, site);
            c.flip(site);
            out[c.index() as usize] = e;
        }
        Ok(out)
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            n: self.n,
            j_scale: self.j_scale,
            seed: self.seed,
            couplings: self.lower_triangle(),
            meta: None,
        }
    }
}

/// On-disk instance: strict lower triangle, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub j_scale: f64,
    pub seed: u64,
    pub couplings: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl TryFrom<InstanceFile> for SkInstance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        let n = f.n;
        if n < 2 {
            return invalid(format!("instance needs n >= 2, got {n}"));
        }
        let expected = n * (n - 1) / 2;
        if f.couplings.len() != expected {
            return invalid(format!(
                "expected {expected} lower-triangle couplings for n = {n}, got {}",
                f.couplings.len()
            ));
        }
        let mut couplings = vec![0.0; n * n];
        let mut it = f.couplings.iter();
        for i in 1..n {
            for j in 0..i {
                let v = *it.next().expect("length checked");
                couplings[i * n + j] = v;
                couplings[j * n + i] = v;
            }
        }
        let inst = SkInstance { n, j_scale: f.j_scale, seed: f.seed, couplings };
        inst.validate()?;
        Ok(inst)
    }
}

/// A ±1 spin string, packed one bit per spin (bit set ↔ `s = -1`).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfig {
    n: usize,
    words: Vec<u64>,
}

impl SpinConfig {
    pub fn all_up(n: usize) -> Self {
        Self { n, words: vec![0; n.div_ceil(64)] }
    }

    pub fn from_spins(spins: &[i8]) -> Result<Self> {
        let mut c = Self::all_up(spins.len());
        for (i, &s) in spins.iter().enumerate() {
            match s {
                1 => {}
                -1 => c.flip(i),
                _ => return invalid(format!("spin {i} is {s}, expected ±1")),
            }
        }
        Ok(c)
    }

    /// Basis state `index` of the `2^n` bit-string basis.
    pub fn from_index(n: usize, index: u64) -> Self {
        assert!(n <= 64, "from_index needs n <= 64");
        let mut c = Self::all_up(n);
        if n > 0 {
            let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            c.words[0] = index & mask;
        }
        c
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut c = Self::all_up(n);
        for i in 0..n {
            if rng.random::<bool>() {
                c.flip(i);
            }
        }
        c
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Bit-string index; only meaningful for `n <= 64`.
    pub fn index(&self) -> u64 {
        debug_assert!(self.n <= 64);
        self.words.first().copied().unwrap_or(0)
    }

    #[inline]
    fn bit(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    /// Spin `i` as ±1.
    #[inline]
    pub fn spin(&self, i: usize) -> i8 {
        assert!(i < self.n, "spin index {i} out of range");
        if self.bit(i) {
            -1
        } else {
            1
        }
    }

    #[inline]
    pub fn spin_f64(&self, i: usize) -> f64 {
        if self.bit(i) {
            -1.0
        } else {
            1.0
        }
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.n).map(|i| self.spin(i)).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.spin_f64(i)).collect()
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.n, "spin index {i} out of range");
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut c = self.clone();
        c.flip(i);
        c
    }

    /// Global spin reversal `-c`.
    pub fn negated(&self) -> Self {
        let mut c = self.clone();
        for w in &mut c.words {
            *w = !*w;
        }
        c.clear_tail();
        c
    }

    fn clear_tail(&mut self) {
        let r = self.n % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    /// Hex of the packed bit-string, most significant digit first, padded to
    /// `ceil(n / 4)` digits. Bit `i` (spin `i`) is set when `s_i = -1`.
    pub fn to_hex(&self) -> String {
        let digits = self.n.div_ceil(4).max(1);
        (0..digits)
            .rev()
            .map(|d| {
                let nib = (0..4)
                    .map(|b| d * 4 + b)
                    .filter(|&i| i < self.n && self.bit(i))
                    .fold(0u32, |acc, i| acc | 1 << (i % 4));
                char::from_digit(nib, 16).expect("nibble")
            })
            .collect()
    }

    pub fn from_hex(n: usize, hex: &str) -> Result<Self> {
        let hex = hex.trim().trim_start_matches("0x");
        let mut c = Self::all_up(n);
        for (d, ch) in hex.chars().rev().enumerate() {
            let nib = ch
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("bad hex digit {ch:?}")))?;
            for b in 0..4 {
                if nib >> b & 1 == 1 {
                    let i = d * 4 + b;
                    if i >= n {
                        return Err(Error::Parse(format!("hex {hex:?} exceeds {n} spins")));
                    }
                    c.flip(i);
                }
            }
        }
        Ok(c)
    }
}

impl fmt::Debug for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpinConfig({}:{})", self.n, self.to_hex())
    }
}

/// Number of sites where `a` and `b` differ.
pub fn hamming(a: &SpinConfig, b: &SpinConfig) -> Result<usize> {
    if a.len() != b.len() {
        return invalid(format!("length mismatch {} vs {}", a.len(), b.len()));
    }
    Ok(a.words
        .iter()
        .zip(&b.words)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum())
}

/// Overlap `m = (1/N) Σ s_i^l s_i^r = 1 - 2 d / N`.
pub fn overlap_slope(l: &SpinConfig, r: &SpinConfig) -> Result<f64> {
    let d = hamming(l, r)?;
    if l.is_empty() {
        return invalid("empty configuration");
    }
    Ok(1.0 - 2.0 * d as f64 / l.len() as f64)
}

/// A single-flip-stable configuration together with its energy.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalMinimum {
    pub config: SpinConfig,
    pub energy: f64,
    /// `energy / (N J)`.
    pub per_spin_energy: f64,
}
