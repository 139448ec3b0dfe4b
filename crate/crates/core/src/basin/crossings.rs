use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{BasinCurve, BasinEnsemble};
use crate::error::{invalid, Result};
use crate::io::fmt_f64;

pub const DEFAULT_GRID: usize = 2048;

/// Curves crossing the reference along one ray, split by whether their
/// classical energy lies above or below the reference's.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossingCounts {
    /// `𝒩_>`.
    pub n_above: usize,
    /// `𝒩_<`.
    pub n_below: usize,
    /// Largest crossing field of each higher-energy curve that crosses.
    pub above_fields: Vec<f64>,
    /// Largest crossing field of each lower-energy curve that crosses.
    pub below_fields: Vec<f64>,
}

impl CrossingCounts {
    /// `𝒩_> / 𝒩_<`, `None` when nothing below crosses.
    pub fn ratio(&self) -> Option<f64> {
        (self.n_below > 0).then(|| self.n_above as f64 / self.n_below as f64)
    }

    /// Last (largest-field) intersection with the reference, 0 if none.
    pub fn last_intersection(&self) -> f64 {
        self.above_fields
            .iter()
            .chain(&self.below_fields)
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Reference level on the grid, shared by every curve.
struct Ray {
    n: usize,
    j: f64,
    chi: f64,
    nodes: Vec<f64>,
    reference: Vec<f64>,
    ref_curve: BasinCurve,
}

impl Ray {
    fn new(ens: &BasinEnsemble, chi: f64, bz_hi: f64, grid: usize) -> Self {
        let nodes: Vec<f64> = (0..grid).map(|k| bz_hi * k as f64 / (grid - 1) as f64).collect();
        let reference = nodes
            .iter()
            .map(|&bz| ens.reference.level(ens.n, ens.j_scale, bz, chi * bz))
            .collect();
        Self { n: ens.n, j: ens.j_scale, chi, nodes, reference, ref_curve: ens.reference }
    }

    #[inline]
    fn diff(&self, c: &BasinCurve, bz: f64) -> f64 {
        c.level(self.n, self.j, bz, self.chi * bz) - self.ref_curve.level(self.n, self.j, bz, self.chi * bz)
    }

    /// Largest crossing field of `c` in `(0, bz_hi]`, if any.
    fn last_crossing(&self, c: &BasinCurve) -> Option<f64> {
        let tol = 1e-10 * self.n as f64 * self.j;
        let mut last = None;
        let mut prev = c.e_l - self.reference[0];
        for k in 1..self.nodes.len() {
            let bz = self.nodes[k];
            let cur = c.level(self.n, self.j, bz, self.chi * bz) - self.reference[k];
            // Zero counts as non-negative, so tangencies do not register.
            if (prev < 0.0) != (cur < 0.0) {
                let (mut lo, mut hi) = (self.nodes[k - 1], bz);
                let lo_neg = prev < 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let g = self.diff(c, mid);
                    if g.abs() < tol || hi - lo <= f64::EPSILON * hi {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if (g < 0.0) == lo_neg {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                last = Some(0.5 * (lo + hi));
            }
            prev = cur;
        }
        last
    }
}

/// Counts curves that intersect the reference along `B_x = chi B_z` for
/// `B_z ∈ (0, bz_hi]`, by sign changes of `Ẽ_l - Ẽ_r` on a uniform grid
/// refined by bisection. Avoided crossings between levels are ignored.
pub fn count_crossings(ens: &BasinEnsemble, chi: f64, bz_hi: f64, grid: usize) -> Result<CrossingCounts> {
    if grid < 2 {
        return invalid(format!("crossing grid needs at least 2 points, got {grid}"));
    }
    if !(chi.is_finite() && chi >= 0.0) {
        return invalid(format!("chi must be non-negative, got {chi}"));
    }
    if !(bz_hi.is_finite() && bz_hi > 0.0) {
        return invalid(format!("bz_hi must be positive, got {bz_hi}"));
    }
    let ray = Ray::new(ens, chi, bz_hi, grid);
    let mut counts = CrossingCounts::default();
    for c in &ens.curves {
        if c.e_l == ens.reference.e_l {
            continue;
        }
        if let Some(bz) = ray.last_crossing(c) {
            if c.e_l > ens.reference.e_l {
                counts.n_above += 1;
                counts.above_fields.push(bz);
            } else {
                counts.n_below += 1;
                counts.below_fields.push(bz);
            }
        }
    }
    Ok(counts)
}

/// Smallest power-of-two field beyond which no curve with `|m| < 1` can
/// still cross: every such curve lies above the reference there.
pub fn auto_bz_hi(ens: &BasinEnsemble, chi: f64) -> f64 {
    let mut bz = 1.0 * ens.j_scale;
    for _ in 0..24 {
        let r = ens.reference.level(ens.n, ens.j_scale, bz, chi * bz);
        let clear = ens
            .curves
            .iter()
            .filter(|c| c.m_l.abs() < 1.0)
            .all(|c| c.level(ens.n, ens.j_scale, bz, chi * bz) > r);
        if clear {
            return bz;
        }
        bz *= 2.0;
    }
    bz
}

/// `B_z^c(chi)`: the last intersection of any curve with the reference.
pub fn critical_field(ens: &BasinEnsemble, chi: f64) -> Result<f64> {
    let hi = auto_bz_hi(ens, chi);
    Ok(count_crossings(ens, chi, hi, DEFAULT_GRID)?.last_intersection())
}

/// First-order line `(B_z^c(chi), chi B_z^c(chi))` for each slope, in input
/// order.
pub fn phase_boundary(ens: &BasinEnsemble, chis: &[f64]) -> Result<Vec<(f64, f64)>> {
    chis.iter()
        .map(|&chi| critical_field(ens, chi).map(|bz| (bz, chi * bz)))
        .collect()
}

/// CSV `chi,bz,bx`.
pub fn write_phase_csv<W: Write>(mut out: W, chis: &[f64], boundary: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(out, "chi,bz,bx")?;
    for (chi, (bz, bx)) in chis.iter().zip(boundary) {
        writeln!(out, "{},{},{}", fmt_f64(*chi), fmt_f64(*bz), fmt_f64(*bx))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ens(reference: BasinCurve, curves: Vec<BasinCurve>) -> BasinEnsemble {
        BasinEnsemble::new(10, 1.0, reference, curves, 0).unwrap()
    }

    #[test]
    fn identical_curve_never_crosses() {
        let r = BasinCurve::new(-12.0, 1.0, 0.4).unwrap();
        let e = ens(r, vec![r]);
        let c = count_crossings(&e, 1.5, 5.0, 256).unwrap();
        assert_eq!((c.n_above, c.n_below), (0, 0));
    }

    #[test]
    fn linear_crossing_at_zero_slope() {
        // chi = 0: E_l - N m bz = E_r - N bz  =>  bz* = (E_r - E_l) / (N (1 - m)).
        let r = BasinCurve::new(-10.0, 1.0, 0.5).unwrap();
        let l = BasinCurve::new(-12.0, 0.2, 0.5).unwrap();
        let e = ens(r, vec![l]);
        let want = 2.0 / (10.0 * 0.8);
        let bzc = critical_field(&e, 0.0).unwrap();
        assert!((bzc - want).abs() < 1e-9, "{bzc} vs {want}");
        let c = count_crossings(&e, 0.0, 2.0, 64).unwrap();
        assert_eq!(c.n_below, 1);
        assert!((c.below_fields[0] - want).abs() < 1e-9);
    }

    #[test]
    fn grid_guard() {
        let r = BasinCurve::new(-10.0, 1.0, 0.5).unwrap();
        let e = ens(r, vec![BasinCurve::new(-11.0, 0.0, 0.5).unwrap()]);
        assert!(count_crossings(&e, 1.0, 1.0, 1).is_err());
        assert!(count_crossings(&e, -1.0, 1.0, 10).is_err());
        assert!(count_crossings(&e, 1.0, 0.0, 10).is_err());
    }

    #[test]
    fn no_lower_curves_means_zero_critical_field() {
        let r = BasinCurve::new(-15.0, 1.0, 0.5).unwrap();
        let curves = vec![
            BasinCurve::new(-12.0, 0.2, 0.3).unwrap(),
            BasinCurve::new(-11.0, -0.4, 0.6).unwrap(),
        ];
        let e = ens(r, curves);
        assert_eq!(critical_field(&e, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn boundary_shape() {
        let r = BasinCurve::new(-10.0, 1.0, 0.5).unwrap();
        let e = ens(r, vec![BasinCurve::new(-12.0, 0.2, 0.5).unwrap()]);
        let chis = [0.0, 0.5, 1.0];
        let b = phase_boundary(&e, &chis).unwrap();
        assert_eq!(b.len(), 3);
        for (chi, (bz, bx)) in chis.iter().zip(&b) {
            assert_eq!(*bx, chi * bz);
        }
    }
}
