//! Classical descent, simulated annealing and exhaustive local-minimum
//! enumeration.
//!
//! A local minimum is a configuration where every single-spin flip strictly
//! raises the energy. Zero-delta flips never count as improvements, so descent
//! stops on plateaus. Basins of attraction are defined by steepest descent
//! with ties broken toward the lowest site index.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;
use crate::rng;
use crate::sk::{LocalMinimum, SkInstance, SpinConfig};

/// Largest `n` for which the `2^n` scans are allowed.
pub const ENUMERATION_LIMIT: usize = 20;

/// Working copy of a configuration with cached local fields.
struct Walker<'a> {
    inst: &'a SkInstance,
    config: SpinConfig,
    spins: Vec<f64>,
    fields: Vec<f64>,
}

impl<'a> Walker<'a> {
    fn new(inst: &'a SkInstance, config: SpinConfig) -> Self {
        let spins = config.to_f64();
        let fields = (0..inst.n()).map(|i| inst.local_field(&config, i)).collect();
        Self { inst, config, spins, fields }
    }

    #[inline]
    fn delta(&self, k: usize) -> f64 {
        -4.0 * self.spins[k] * self.fields[k]
    }

    fn flip(&mut self, k: usize) {
        let old = self.spins[k];
        for (h, jjk) in self.fields.iter_mut().zip(self.inst.row(k)) {
            *h -= 2.0 * old * jjk;
        }
        self.spins[k] = -old;
        self.config.flip(k);
    }

    fn steepest(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..self.spins.len() {
            let d = self.delta(k);
            if d < 0.0 && best.is_none_or(|(_, b)| d < b) {
                best = Some((k, d));
            }
        }
        best.map(|(k, _)| k)
    }

    fn finish(self) -> LocalMinimum {
        self.inst.minimum_unchecked(self.config)
    }
}

fn check_dims(inst: &SkInstance, c: &SpinConfig) -> Result<()> {
    if c.len() != inst.n() {
        return invalid(format!("config has {} spins, instance has {}", c.len(), inst.n()));
    }
    Ok(())
}

/// First-improvement descent over sites visited in a seed-shuffled order,
/// repeated until no single flip lowers the energy.
pub fn greedy_descent(inst: &SkInstance, start: &SpinConfig, seed: u64) -> Result<LocalMinimum> {
    check_dims(inst, start)?;
    let mut rng = rng::stream(seed);
    let mut w = Walker::new(inst, start.clone());
    descend(&mut w, &mut rng);
    Ok(w.finish())
}

fn descend<R: Rng + ?Sized>(w: &mut Walker<'_>, rng: &mut R) {
    let mut order: Vec<usize> = (0..w.spins.len()).collect();
    loop {
        order.shuffle(rng);
        let mut improved = false;
        for &k in &order {
            if w.delta(k) < 0.0 {
                w.flip(k);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
}

/// Steepest-descent endpoint of `c`; this defines basin membership.
pub fn basin_of(inst: &SkInstance, c: &SpinConfig) -> Result<LocalMinimum> {
    check_dims(inst, c)?;
    let mut w = Walker::new(inst, c.clone());
    while let Some(k) = w.steepest() {
        w.flip(k);
    }
    Ok(w.finish())
}

/// Annealing schedule: `sweeps` temperatures, geometric from `t_hot` down to
/// `t_cold`. A zero `t_cold` with a positive `t_hot` is approached
/// geometrically down to `t_hot * 1e-4` and the last sweep runs at zero.
pub fn geometric_schedule(sweeps: usize, t_hot: f64, t_cold: f64) -> Vec<f64> {
    if sweeps <= 1 || t_hot == 0.0 {
        return vec![t_cold; sweeps.max(1)];
    }
    let floor = if t_cold > 0.0 { t_cold } else { t_hot * 1e-4 };
    let ratio = (floor / t_hot).ln() / (sweeps - 1) as f64;
    let mut temps: Vec<f64> = (0..sweeps).map(|k| t_hot * (ratio * k as f64).exp()).collect();
    *temps.last_mut().expect("sweeps >= 2") = t_cold;
    temps
}

/// Metropolis single-flip annealing with a geometric schedule (`n` random
/// flip attempts per sweep), finished by [`greedy_descent`].
pub fn simulated_anneal(
    inst: &SkInstance,
    start: &SpinConfig,
    sweeps: usize,
    t_hot: f64,
    t_cold: f64,
    seed: u64,
) -> Result<LocalMinimum> {
    check_dims(inst, start)?;
    if sweeps == 0 {
        return invalid("annealing needs at least one sweep");
    }
    if !(t_cold >= 0.0 && t_hot >= t_cold && t_hot.is_finite()) {
        return invalid(format!("need t_hot >= t_cold >= 0, got {t_hot}, {t_cold}"));
    }
    let mut rng = rng::stream(seed);
    let n = inst.n();
    let mut w = Walker::new(inst, start.clone());
    for t in geometric_schedule(sweeps, t_hot, t_cold) {
        for _ in 0..n {
            let k = rng.random_range(0..n);
            let d = w.delta(k);
            let accept = if d < 0.0 {
                true
            } else if t > 0.0 {
                rng.random::<f64>() < (-d / t).exp()
            } else {
                false
            };
            if accept {
                w.flip(k);
            }
        }
    }
    descend(&mut w, &mut rng);
    Ok(w.finish())
}

fn check_enumerable(inst: &SkInstance) -> Result<()> {
    if inst.n() > ENUMERATION_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "exhaustive scan needs n <= {ENUMERATION_LIMIT}, got {}",
            inst.n()
        )));
    }
    Ok(())
}

/// Every single-flip-stable configuration, sorted by energy then index.
pub fn enumerate_minima(inst: &SkInstance) -> Result<Vec<LocalMinimum>> {
    check_enumerable(inst)?;
    let n = inst.n();
    let energies = inst.all_energies()?;
    let mut found: Vec<usize> = (0..energies.len())
        .filter(|&a| (0..n).all(|k| energies[a ^ (1 << k)] > energies[a]))
        .collect();
    found.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]).then(a.cmp(&b)));
    Ok(found
        .into_iter()
        .map(|a| inst.minimum_unchecked(SpinConfig::from_index(n, a as u64)))
        .collect())
}

/// Exhaustive ground state (lowest energy, lowest index on ties).
pub fn ground_state(inst: &SkInstance) -> Result<LocalMinimum> {
    Ok(enumerate_minima(inst)?.swap_remove(0))
}

/// Steepest-descent basin partition of the full configuration space.
#[derive(Clone, Debug)]
pub struct BasinMap {
    /// Basin label per basis index, pointing into `minima`.
    pub labels: Vec<u32>,
    /// Minima sorted as in [`enumerate_minima`].
    pub minima: Vec<LocalMinimum>,
}

impl BasinMap {
    pub fn build(inst: &SkInstance) -> Result<Self> {
        check_enumerable(inst)?;
        let n = inst.n();
        let energies = inst.all_energies()?;
        let dim = energies.len();
        // Steepest-descent successor of every state (itself at minima).
        let next: Vec<usize> = (0..dim)
            .map(|a| {
                let mut best = a;
                let mut best_d = 0.0;
                for k in 0..n {
                    let d = energies[a ^ (1 << k)] - energies[a];
                    if d < best_d {
                        best_d = d;
                        best = a ^ (1 << k);
                    }
                }
                best
            })
            .collect();
        let minima = enumerate_minima(inst)?;
        let mut labels = vec![u32::MAX; dim];
        for (id, m) in minima.iter().enumerate() {
            labels[m.config.index() as usize] = id as u32;
        }
        let mut path = Vec::new();
        for start in 0..dim {
            let mut a = start;
            while labels[a] == u32::MAX {
                path.push(a);
                a = next[a];
            }
            let label = labels[a];
            for p in path.drain(..) {
                labels[p] = label;
            }
        }
        Ok(Self { labels, minima })
    }

    /// Basis indices of basin `id`, ascending.
    pub fn members(&self, id: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l as usize == id)
            .map(|(a, _)| a)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.minima.len()];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

/// CSV with columns `rank,energy,per_spin_energy,bitstring_hex`.
pub fn write_minima_csv<W: Write>(mut out: W, minima: &[LocalMinimum]) -> std::io::Result<()> {
    writeln!(out, "rank,energy,per_spin_energy,bitstring_hex")?;
    for (rank, m) in minima.iter().enumerate() {
        writeln!(
            out,
            "{rank},{},{},{}",
            fmt_f64(m.energy),
            fmt_f64(m.per_spin_energy),
            m.config.to_hex()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle_minima(inst: &SkInstance) -> Vec<u64> {
        let n = inst.n();
        (0..1u64 << n)
            .filter(|&a| {
                let c = SpinConfig::from_index(n, a);
                let e = inst.energy(&c).unwrap();
                (0..n).all(|k| inst.energy(&c.flipped(k)).unwrap() > e)
            })
            .collect()
    }

    #[test]
    fn fixed_point_is_returned_unchanged() {
        let inst = SkInstance::generate(8, 1.0, 2).unwrap();
        let m = enumerate_minima(&inst).unwrap();
        for lm in &m {
            assert_eq!(greedy_descent(&inst, &lm.config, 9).unwrap().config, lm.config);
            assert_eq!(basin_of(&inst, &lm.config).unwrap().config, lm.config);
        }
    }

    #[test]
    fn descent_lands_in_oracle_set() {
        for seed in 0..10 {
            let inst = SkInstance::generate(3, 1.0, seed).unwrap();
            let oracle = oracle_minima(&inst);
            for a in 0..8 {
                let start = SpinConfig::from_index(3, a);
                let lm = greedy_descent(&inst, &start, seed).unwrap();
                assert!(oracle.contains(&lm.config.index()));
                assert!(lm.energy <= inst.energy(&start).unwrap());
            }
        }
    }

    #[test]
    fn two_spin_ferro_coupling_minima() {
        let inst = SkInstance::from_matrix(&[vec![0.0, 0.7], vec![0.7, 0.0]], 1.0, 0).unwrap();
        let m = enumerate_minima(&inst).unwrap();
        let mut idx: Vec<u64> = m.iter().map(|lm| lm.config.index()).collect();
        idx.sort();
        // (+,-) and (-,+): indices 0b10 and 0b01.
        assert_eq!(idx, vec![1, 2]);
        assert_eq!(m[0].energy, -1.4);
    }

    #[test]
    fn enumeration_matches_oracle_and_pairs() {
        let inst = SkInstance::generate(9, 1.0, 5).unwrap();
        let m = enumerate_minima(&inst).unwrap();
        let mut got: Vec<u64> = m.iter().map(|lm| lm.config.index()).collect();
        got.sort();
        assert_eq!(got, oracle_minima(&inst));
        assert!(m.windows(2).all(|w| w[0].energy <= w[1].energy));
        for lm in &m {
            let partner = lm.config.negated();
            assert!(m.iter().any(|o| o.config == partner && o.energy == lm.energy));
        }
    }

    #[test]
    fn enumeration_guard() {
        let inst = SkInstance::generate(21, 1.0, 0).unwrap();
        assert!(matches!(enumerate_minima(&inst), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn basins_cover_space_once() {
        let inst = SkInstance::generate(8, 1.0, 3).unwrap();
        let map = BasinMap::build(&inst).unwrap();
        assert_eq!(map.sizes().iter().sum::<usize>(), 256);
        for a in 0..256u64 {
            let c = SpinConfig::from_index(8, a);
            let b = basin_of(&inst, &c).unwrap();
            assert_eq!(map.minima[map.labels[a as usize] as usize].config, b.config);
            assert_eq!(basin_of(&inst, &b.config).unwrap().config, b.config);
        }
    }

    #[test]
    fn neighbours_of_deep_minimum_return_when_all_paths_do() {
        let inst = SkInstance::generate(10, 1.0, 4).unwrap();
        let gs = ground_state(&inst).unwrap();
        // Brute force: a neighbour flows back iff every strictly descending
        // path from it ends at the ground state.
        fn all_paths_end(inst: &SkInstance, c: &SpinConfig, target: &SpinConfig) -> bool {
            let e = inst.energy(c).unwrap();
            let down: Vec<SpinConfig> = (0..inst.n())
                .map(|k| c.flipped(k))
                .filter(|d| inst.energy(d).unwrap() < e)
                .collect();
            if down.is_empty() {
                return c == target;
            }
            down.iter().all(|d| all_paths_end(inst, d, target))
        }
        let mut checked = 0;
        for k in 0..10 {
            let nb = gs.config.flipped(k);
            if all_paths_end(&inst, &nb, &gs.config) {
                assert_eq!(basin_of(&inst, &nb).unwrap().config, gs.config);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn zero_temperature_anneal_is_descent() {
        let inst = SkInstance::generate(10, 1.0, 6).unwrap();
        let start = SpinConfig::random(10, &mut rng::stream(1));
        let lm = simulated_anneal(&inst, &start, 5, 0.0, 0.0, 3).unwrap();
        assert!(inst.is_single_flip_stable(&lm.config));
        assert!(lm.energy <= inst.energy(&start).unwrap());
        let again = simulated_anneal(&inst, &start, 5, 0.0, 0.0, 3).unwrap();
        assert_eq!(lm, again);
    }

    #[test]
    fn anneal_rejects_bad_schedule() {
        let inst = SkInstance::generate(4, 1.0, 0).unwrap();
        let c = SpinConfig::all_up(4);
        assert!(simulated_anneal(&inst, &c, 0, 1.0, 0.1, 0).is_err());
        assert!(simulated_anneal(&inst, &c, 10, 0.1, 1.0, 0).is_err());
        assert!(simulated_anneal(&inst, &c, 10, 1.0, -0.1, 0).is_err());
    }

    #[test]
    fn schedule_shape() {
        let s = geometric_schedule(5, 2.0, 0.02);
        assert_eq!(s.len(), 5);
        assert!((s[0] - 2.0).abs() < 1e-15 && s[4] == 0.02);
        assert!(s.windows(2).all(|w| w[1] < w[0]));
        let z = geometric_schedule(3, 1.0, 0.0);
        assert_eq!(z[2], 0.0);
        assert_eq!(geometric_schedule(1, 1.0, 0.5), vec![0.5]);
    }
}
