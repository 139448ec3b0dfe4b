//! Spectra of the reference-field Hamiltonian: dense diagonalization for
//! small systems, Lanczos for the low-lying levels, gap scans along step-3
//! rays, and basin-restricted ("isolated minimum") levels.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use super::{FieldPoint, ReferenceHamiltonian};
use crate::classical::BasinMap;
use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::rng;
use crate::sk::{SkInstance, SpinConfig};

/// Largest `n` diagonalized densely (a `4096 × 4096` matrix).
pub const DENSE_LIMIT: usize = 12;

/// Below this dimension Lanczos requests fall back to dense.
const DENSE_FALLBACK_DIM: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumMode {
    /// Every eigenvalue, `n <= DENSE_LIMIT`.
    Dense,
    /// The `k` lowest eigenvalues by Lanczos with the matrix-free action.
    LowK(usize),
}

impl Default for SpectrumMode {
    fn default() -> Self {
        SpectrumMode::LowK(8)
    }
}

/// Eigenvalues (ascending) at one field point.
#[derive(Clone, Debug)]
pub struct SpectrumSlice {
    pub field: FieldPoint,
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors matching `eigenvalues`, when requested.
    pub eigenvectors: Option<Vec<Vec<f64>>>,
}

impl SpectrumSlice {
    pub fn gap(&self) -> Option<f64> {
        match self.eigenvalues.as_slice() {
            [e0, e1, ..] => Some(e1 - e0),
            _ => None,
        }
    }
}

fn sorted_eigen(m: DMatrix<f64>, vectors: bool) -> (Vec<f64>, Option<Vec<Vec<f64>>>) {
    if !vectors {
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        return (ev, None);
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (values, Some(vecs))
}

/// Every eigenvalue of `H` at `f` (dense, `n <= DENSE_LIMIT`).
pub fn full_spectrum(inst: &SkInstance, reference: &SpinConfig, f: FieldPoint) -> Result<SpectrumSlice> {
    let h = ReferenceHamiltonian::new(inst, reference)?;
    spectrum(&h, f, SpectrumMode::Dense, false)
}

/// Spectrum of a prepared Hamiltonian in the requested mode.
pub fn spectrum(
    h: &ReferenceHamiltonian,
    f: FieldPoint,
    mode: SpectrumMode,
    vectors: bool,
) -> Result<SpectrumSlice> {
    match mode {
        SpectrumMode::Dense => {
            if h.n() > DENSE_LIMIT {
                return Err(Error::ResourceLimit(format!(
                    "dense spectrum needs n <= {DENSE_LIMIT}, got {}; use the low-k mode",
                    h.n()
                )));
            }
            let (eigenvalues, eigenvectors) = sorted_eigen(h.dense(f, None), vectors);
            Ok(SpectrumSlice { field: f, eigenvalues, eigenvectors })
        }
        SpectrumMode::LowK(k) => low_spectrum(h, f, k, vectors),
    }
}

/// The `k` lowest levels by Lanczos (dense for tiny systems).
pub fn low_spectrum(h: &ReferenceHamiltonian, f: FieldPoint, k: usize, vectors: bool) -> Result<SpectrumSlice> {
    if k == 0 {
        return invalid("low-k spectrum needs k >= 1");
    }
    let dim = h.dim();
    let k = k.min(dim);
    let (mut values, mut vecs) = if dim <= DENSE_FALLBACK_DIM {
        sorted_eigen(h.dense(f, None), vectors)
    } else {
        lanczos(|v, out| h.apply_real(f, v, out), dim, k, vectors, 0x1A2C)
    };
    values.truncate(k);
    if let Some(v) = vecs.as_mut() {
        v.truncate(k);
    }
    Ok(SpectrumSlice { field: f, eigenvalues: values, eigenvectors: vecs })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= c * qi;
            }
        }
    }
}

fn random_unit(dim: usize, basis: &[Vec<f64>], rng: &mut impl Rng) -> Option<Vec<f64>> {
    for _ in 0..4 {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, basis);
        let nrm = dot(&v, &v).sqrt();
        if nrm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nrm);
            return Some(v);
        }
    }
    None
}

/// Lanczos with full reorthogonalization for the `k` lowest eigenpairs of a
/// real symmetric operator. On breakdown the iteration restarts from a fresh
/// random vector orthogonal to the Krylov basis so degenerate levels are not
/// lost.
pub(crate) fn lanczos<F>(apply: F, dim: usize, k: usize, vectors: bool, seed: u64) -> (Vec<f64>, Option<Vec<Vec<f64>>>)
where
    F: Fn(&[f64], &mut [f64]),
{
    const TOL: f64 = 1e-11;
    const MIN_CHAIN: usize = 24;
    let max_basis = dim.min(k * 10 + 300);
    let mut rng = rng::stream(seed);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q = random_unit(dim, &basis, &mut rng).expect("dim >= 1");
    let mut w = vec![0.0; dim];
    let mut chain_len = 0usize;
    let mut scale = 1.0f64;
    loop {
        apply(&q, &mut w);
        let a = dot(&q, &w);
        alpha.push(a);
        basis.push(q);
        chain_len += 1;
        orthogonalize(&mut w, &basis);
        let b = dot(&w, &w).sqrt();
        scale = scale.max(a.abs()).max(b);
        let m = basis.len();
        let breakdown = b <= 1e-12 * scale;
        let full = m >= max_basis;
        if full || (m >= k && (breakdown || m % 8 == 0)) {
            let t = tridiagonal(&alpha, &beta);
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
            let converged = order.iter().take(k).all(|&i| {
                let theta = eig.eigenvalues[i];
                b * eig.eigenvectors[(m - 1, i)].abs() <= TOL * theta.abs().max(1.0)
            });
            let chain_settled = breakdown || chain_len >= MIN_CHAIN.min(dim);
            if full || m == dim || (converged && chain_settled && !breakdown) || (breakdown && m == dim) {
                let values: Vec<f64> = order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect();
                let vecs = vectors.then(|| {
                    order
                        .iter()
                        .take(k)
                        .map(|&i| {
                            let mut v = vec![0.0; dim];
                            for (j, qj) in basis.iter().enumerate() {
                                let c = eig.eigenvectors[(j, i)];
                                for (vi, qi) in v.iter_mut().zip(qj) {
                                    *vi += c * qi;
                                }
                            }
                            v
                        })
                        .collect()
                });
                return (values, vecs);
            }
        }
        if breakdown {
            match random_unit(dim, &basis, &mut rng) {
                Some(fresh) => {
                    beta.push(0.0);
                    q = fresh;
                    chain_len = 0;
                }
                None => {
                    // Basis already spans the space numerically.
                    let t = tridiagonal(&alpha, &beta);
                    let mut ev: Vec<f64> = t.symmetric_eigenvalues().iter().copied().collect();
                    ev.sort_by(f64::total_cmp);
                    ev.truncate(k);
                    return (ev, None);
                }
            }
        } else {
            beta.push(b);
            q = w.iter().map(|x| x / b).collect();
        }
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// How the minimum along a ray is selected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapSearch {
    /// Smallest gap over the whole grid.
    Global,
    /// First local minimum met when scanning from the paramagnet (largest
    /// `bz`) toward the origin: the first avoided crossing of the ground
    /// state along step 3.
    FirstDip,
}

#[derive(Clone, Copy, Debug)]
pub struct GapOptions {
    pub search: GapSearch,
    /// Golden-section refinement between the neighbours of the selected node.
    pub refine: bool,
    pub mode: SpectrumMode,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self { search: GapSearch::Global, refine: false, mode: SpectrumMode::LowK(2) }
    }
}

#[derive(Clone, Debug)]
pub struct GapResult {
    pub gap: f64,
    pub field: FieldPoint,
    /// `(bz, E_1 - E_0)` on every grid node.
    pub profile: Vec<(f64, f64)>,
}

fn two_level_gap(h: &ReferenceHamiltonian, f: FieldPoint, mode: SpectrumMode) -> Result<f64> {
    let mode = match mode {
        SpectrumMode::LowK(k) => SpectrumMode::LowK(k.max(2)),
        dense => dense,
    };
    let s = spectrum(h, f, mode, false)?;
    s.gap().ok_or_else(|| Error::InvalidArgument("spectrum has a single level".into()))
}

/// Minimum of `E_1 - E_0` along `B_x = chi B_z` over a descending `bz` grid.
pub fn min_gap_along_ray(
    inst: &SkInstance,
    reference: &SpinConfig,
    chi: f64,
    bz_grid: &[f64],
    opts: GapOptions,
) -> Result<GapResult> {
    let h = ReferenceHamiltonian::new(inst, reference)?;
    gap_scan(&h, chi, bz_grid, opts)
}

/// [`min_gap_along_ray`] on a prepared Hamiltonian.
pub fn gap_scan(h: &ReferenceHamiltonian, chi: f64, bz_grid: &[f64], opts: GapOptions) -> Result<GapResult> {
    if bz_grid.is_empty() {
        return invalid("empty bz grid");
    }
    if !(chi.is_finite() && chi > 0.0) {
        return invalid(format!("gap scan needs chi > 0, got {chi}"));
    }
    if bz_grid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return invalid("bz grid must be finite and non-negative");
    }
    if bz_grid.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("bz grid must be strictly descending");
    }
    let gaps: Vec<f64> = bz_grid
        .par_iter()
        .map(|&bz| two_level_gap(h, FieldPoint::on_ray(chi, bz), opts.mode))
        .collect::<Result<_>>()?;
    let pick = match opts.search {
        GapSearch::Global => gaps
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("non-empty"),
        GapSearch::FirstDip => {
            let mut i = 0;
            while i + 1 < gaps.len() && gaps[i + 1] < gaps[i] {
                i += 1;
            }
            i
        }
    };
    let mut best = (bz_grid[pick], gaps[pick]);
    if opts.refine && bz_grid.len() > 1 {
        let hi = bz_grid[pick.saturating_sub(1)];
        let lo = bz_grid[(pick + 1).min(bz_grid.len() - 1)];
        let refined = golden_min(lo, hi, |bz| two_level_gap(h, FieldPoint::on_ray(chi, bz), opts.mode))?;
        if refined.1 < best.1 {
            best = refined;
        }
    }
    Ok(GapResult {
        gap: best.1,
        field: FieldPoint::on_ray(chi, best.0),
        profile: bz_grid.iter().copied().zip(gaps).collect(),
    })
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
fn golden_min<F>(mut lo: f64, mut hi: f64, f: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..64 {
        if hi - lo <= 1e-12 * hi.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 < f2 { (x1, f1) } else { (x2, f2) })
}

/// Lowest level of `H` restricted to one steepest-descent basin.
#[derive(Clone, Debug, PartialEq)]
pub struct IsolatedLevel {
    /// Index into [`BasinMap::minima`].
    pub id: usize,
    pub level: f64,
    /// Number of basis states in the basin.
    pub size: usize,
}

/// Diagonalizes `H` inside each basin with every coupling that leaves the
/// basin dropped, giving one level per local minimum free of the avoided
/// crossings between minima.
pub fn isolate_basins(
    inst: &SkInstance,
    reference: &SpinConfig,
    f: FieldPoint,
    basins: &BasinMap,
) -> Result<Vec<IsolatedLevel>> {
    if inst.n() > DENSE_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "basin isolation needs n <= {DENSE_LIMIT}, got {}",
            inst.n()
        )));
    }
    let h = ReferenceHamiltonian::new(inst, reference)?;
    if basins.labels.len() != h.dim() {
        return invalid("basin map does not match the instance");
    }
    isolate_with(&h, f, basins)
}

pub(crate) fn isolate_with(h: &ReferenceHamiltonian, f: FieldPoint, basins: &BasinMap) -> Result<Vec<IsolatedLevel>> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); basins.minima.len()];
    for (a, &l) in basins.labels.iter().enumerate() {
        members[l as usize].push(a);
    }
    Ok(members
        .par_iter()
        .enumerate()
        .map(|(id, states)| {
            let level = if states.len() <= 512 {
                h.dense(f, Some(states)).symmetric_eigenvalues().min()
            } else {
                restricted_ground(h, f, states)
            };
            IsolatedLevel { id, level, size: states.len() }
        })
        .collect())
}

fn restricted_ground(h: &ReferenceHamiltonian, f: FieldPoint, states: &[usize]) -> f64 {
    let mut local = vec![usize::MAX; h.dim()];
    for (i, &a) in states.iter().enumerate() {
        local[a] = i;
    }
    let n = h.n();
    let apply = |v: &[f64], out: &mut [f64]| {
        for (i, &a) in states.iter().enumerate() {
            let mut acc = h.diagonal_entry(a, f.bz) * v[i];
            for k in 0..n {
                let j = local[a ^ (1 << k)];
                if j != usize::MAX {
                    acc -= f.bx * v[j];
                }
            }
            out[i] = acc;
        }
    };
    lanczos(apply, states.len(), 1, false, 0x5EED).0[0]
}

/// CSV rows `bz,bx,k,eigenvalue` for a list of slices.
pub fn write_spectrum_csv<W: Write>(mut out: W, slices: &[SpectrumSlice]) -> std::io::Result<()> {
    writeln!(out, "bz,bx,k,eigenvalue")?;
    for s in slices {
        for (k, e) in s.eigenvalues.iter().enumerate() {
            writeln!(out, "{},{},{k},{}", fmt_f64(s.field.bz), fmt_f64(s.field.bx), fmt_f64(*e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::BasinMap;

    #[test]
    fn lanczos_matches_dense() {
        let inst = SkInstance::generate(9, 1.0, 3).unwrap();
        let r = SpinConfig::from_index(9, 77);
        let h = ReferenceHamiltonian::new(&inst, &r).unwrap();
        for f in [FieldPoint { bz: 0.5, bx: 0.3 }, FieldPoint { bz: 1.2, bx: 2.0 }] {
            let dense = spectrum(&h, f, SpectrumMode::Dense, false).unwrap();
            let low = low_spectrum(&h, f, 6, true).unwrap();
            for (a, b) in dense.eigenvalues.iter().zip(&low.eigenvalues) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
            let v0 = &low.eigenvectors.as_ref().unwrap()[0];
            let mut hv = vec![0.0; v0.len()];
            h.apply_real(f, v0, &mut hv);
            let res: f64 = hv.iter().zip(v0).map(|(x, y)| (x - low.eigenvalues[0] * y).powi(2)).sum();
            assert!(res.sqrt() < 1e-8);
        }
    }

    #[test]
    fn lanczos_survives_degeneracy() {
        // bz = bx = 0: every level is doubly degenerate by global flip symmetry.
        let inst = SkInstance::generate(8, 1.0, 5).unwrap();
        let r = SpinConfig::all_up(8);
        let h = ReferenceHamiltonian::new(&inst, &r).unwrap();
        let f = FieldPoint { bz: 0.0, bx: 0.0 };
        let low = low_spectrum(&h, f, 4, false).unwrap();
        let mut e = inst.all_energies().unwrap();
        e.sort_by(f64::total_cmp);
        for (a, b) in low.eigenvalues.iter().zip(&e) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn strong_transverse_field_gap() {
        let inst = SkInstance::generate(6, 1.0, 2).unwrap();
        let r = SpinConfig::all_up(6);
        let s = full_spectrum(&inst, &r, FieldPoint { bz: 0.0, bx: 200.0 }).unwrap();
        let gap = s.gap().unwrap();
        assert!((gap / (2.0 * 200.0) - 1.0).abs() < 0.01, "gap {gap}");
    }

    #[test]
    fn dense_guard() {
        let inst = SkInstance::generate(13, 1.0, 0).unwrap();
        let r = SpinConfig::all_up(13);
        let err = full_spectrum(&inst, &r, FieldPoint { bz: 0.0, bx: 0.0 }).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
    }

    #[test]
    fn gap_scan_validation() {
        let inst = SkInstance::generate(4, 1.0, 0).unwrap();
        let r = SpinConfig::all_up(4);
        let o = GapOptions::default();
        assert!(min_gap_along_ray(&inst, &r, 1.0, &[], o).is_err());
        assert!(min_gap_along_ray(&inst, &r, 0.0, &[1.0], o).is_err());
        assert!(min_gap_along_ray(&inst, &r, 1.0, &[0.5, 1.0], o).is_err());
        let g = min_gap_along_ray(&inst, &r, 1.0, &[3.0, 2.0, 1.0], o).unwrap();
        assert!(g.profile.iter().all(|&(_, x)| x >= g.gap));
    }

    #[test]
    fn basin_levels_in_classical_limit() {
        let inst = SkInstance::generate(8, 1.0, 9).unwrap();
        let map = BasinMap::build(&inst).unwrap();
        let r = map.minima.last().unwrap().config.clone();
        let bz = 0.37;
        let levels = isolate_basins(&inst, &r, FieldPoint { bz, bx: 0.0 }, &map).unwrap();
        assert_eq!(levels.iter().map(|l| l.size).sum::<usize>(), 256);
        // At bx = 0 each restricted block is diagonal; its minimum is the
        // lowest Zeeman-shifted entry in the basin.
        let h = ReferenceHamiltonian::new(&inst, &r).unwrap();
        for l in &levels {
            let want = map
                .members(l.id)
                .into_iter()
                .map(|a| h.diagonal_entry(a, bz))
                .fold(f64::INFINITY, f64::min);
            assert!((l.level - want).abs() < 1e-12);
        }
        let at_zero = isolate_basins(&inst, &r, FieldPoint { bz: 0.0, bx: 0.0 }, &map).unwrap();
        for l in &at_zero {
            assert!((l.level - map.minima[l.id].energy).abs() < 1e-12);
        }
    }

    #[test]
    fn golden_section_finds_vertex() {
        let (x, y) = golden_min(0.0, 2.0, |x| Ok(((x - 0.7) * (x - 0.7) + 1e-8).sqrt())).unwrap();
        assert!((x - 0.7).abs() < 1e-8 && (y - 1e-4).abs() < 1e-8);
    }
}
