//! Joint fit of `ratio ∝ (chi - chi_c)^γ / (eps_r - eps_gs)^δ`.
//!
//! For a trial `chi_c` the model is linear in `log`s, so `γ`, `δ` and the
//! amplitude come from ordinary least squares; `chi_c` itself is found by a
//! log-spaced scan of `min(chi) - chi_c` followed by golden-section
//! refinement of the residual sum of squares.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SweepRow;
use crate::error::{invalid, Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub chi: f64,
    pub eps_r: f64,
    pub ratio: f64,
}

impl FitPoint {
    /// Cells with a defined, positive ratio.
    pub fn from_rows(rows: &[SweepRow]) -> Vec<Self> {
        rows.iter()
            .filter_map(|r| r.ratio.filter(|x| *x > 0.0).map(|ratio| Self { chi: r.chi, eps_r: r.eps_r, ratio }))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub gamma: f64,
    /// Absent when every point shares one reference energy.
    pub delta: Option<f64>,
    pub chi_c: f64,
    /// Log-amplitude.
    pub log_amplitude: f64,
    pub eps_gs: f64,
    /// `log(ratio) - model` per point, in input order.
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
    /// Smallest and largest `chi` used.
    pub window: (f64, f64),
    pub points: usize,
}

struct Linear {
    gamma: f64,
    delta: Option<f64>,
    log_amplitude: f64,
    residuals: Vec<f64>,
    sse: f64,
}

fn linear_fit(points: &[FitPoint], chi_c: f64, eps_gs: f64, with_delta: bool) -> Option<Linear> {
    let cols = if with_delta { 3 } else { 2 };
    let m = points.len();
    let mut a = DMatrix::zeros(m, cols);
    let mut y = DVector::zeros(m);
    for (i, p) in points.iter().enumerate() {
        let dx = p.chi - chi_c;
        if dx <= 0.0 {
            return None;
        }
        a[(i, 0)] = 1.0;
        a[(i, 1)] = dx.ln();
        if with_delta {
            a[(i, 2)] = -(p.eps_r - eps_gs).ln();
        }
        y[i] = p.ratio.ln();
    }
    let svd = a.clone().svd(true, true);
    let beta = svd.solve(&y, 1e-12).ok()?;
    let fitted = &a * &beta;
    let residuals: Vec<f64> = (0..m).map(|i| y[i] - fitted[i]).collect();
    let sse = residuals.iter().map(|r| r * r).sum();
    Some(Linear {
        log_amplitude: beta[0],
        gamma: beta[1],
        delta: with_delta.then(|| beta[2]),
        residuals,
        sse,
    })
}

/// Fits `γ`, `δ` and `chi_c` to points with positive ratios.
pub fn fit_exponents(points: &[FitPoint], eps_gs: f64) -> Result<FitResult> {
    let pts: Vec<FitPoint> = points
        .iter()
        .copied()
        .filter(|p| p.ratio.is_finite() && p.ratio > 0.0 && p.chi.is_finite())
        .collect();
    let mut chis: Vec<f64> = pts.iter().map(|p| p.chi).collect();
    chis.sort_by(f64::total_cmp);
    chis.dedup();
    if chis.len() < 3 {
        return Err(Error::FitWindow(format!(
            "need at least 3 distinct slopes with a defined ratio, got {}",
            chis.len()
        )));
    }
    if pts.iter().any(|p| !(p.eps_r > eps_gs)) {
        return invalid("every reference energy must lie above eps_gs");
    }
    let mut eps: Vec<f64> = pts.iter().map(|p| p.eps_r).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let with_delta = eps.len() > 1;
    let params = if with_delta { 4 } else { 3 };
    if pts.len() <= params {
        return Err(Error::FitWindow(format!("{} points cannot fix {params} parameters", pts.len())));
    }
    let (lo, hi) = (chis[0], *chis.last().expect("non-empty"));
    let range = hi - lo;
    let sse_at = |log_d: f64| {
        linear_fit(&pts, lo - log_d.exp(), eps_gs, with_delta).map_or(f64::INFINITY, |l| l.sse)
    };
    let (a, b) = ((1e-6 * range).ln(), (1e2 * range).ln());
    const SCAN: usize = 400;
    let grid: Vec<f64> = (0..SCAN).map(|k| a + (b - a) * k as f64 / (SCAN - 1) as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&x| sse_at(x)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .expect("non-empty scan");
    let (mut l, mut r) = (grid[best.saturating_sub(1)], grid[(best + 1).min(SCAN - 1)]);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (r - phi * (r - l), l + phi * (r - l));
    let (mut f1, mut f2) = (sse_at(x1), sse_at(x2));
    for _ in 0..200 {
        if r - l < 1e-13 {
            break;
        }
        if f1 < f2 {
            r = x2;
            x2 = x1;
            f2 = f1;
            x1 = r - phi * (r - l);
            f1 = sse_at(x1);
        } else {
            l = x1;
            x1 = x2;
            f1 = f2;
            x2 = l + phi * (r - l);
            f2 = sse_at(x2);
        }
    }
    let mut log_d = if f1 < f2 { x1 } else { x2 };
    if values[best] < f1.min(f2) {
        log_d = grid[best];
    }
    let chi_c = lo - log_d.exp();
    let fit = linear_fit(&pts, chi_c, eps_gs, with_delta)
        .ok_or_else(|| Error::FitWindow("degenerate least-squares problem".into()))?;
    let span = (hi - chi_c) / (lo - chi_c);
    if span < 10.0 {
        return Err(Error::FitWindow(format!(
            "chi - chi_c spans a factor {span:.3}, need at least one decade"
        )));
    }
    if !(fit.gamma > 0.0) || fit.delta.is_some_and(|d| !(d > 0.0)) {
        return Err(Error::FitWindow(format!(
            "fit gave non-positive exponents (gamma {}, delta {:?})",
            fit.gamma, fit.delta
        )));
    }
    let rms = (fit.sse / pts.len() as f64).sqrt();
    Ok(FitResult {
        gamma: fit.gamma,
        delta: fit.delta,
        chi_c,
        log_amplitude: fit.log_amplitude,
        eps_gs,
        residuals: fit.residuals,
        rms_residual: rms,
        window: (lo, hi),
        points: pts.len(),
    })
}

/// Points drawn from the scaling law, with optional multiplicative Gaussian
/// noise `ratio * (1 + noise z)`. Slopes at or below `chi_c` are skipped.
#[allow(clippy::too_many_arguments)]
pub fn synthetic_table(
    gamma: f64,
    delta: f64,
    chi_c: f64,
    eps_gs: f64,
    chis: &[f64],
    eps_rs: &[f64],
    noise: f64,
    seed: u64,
) -> Vec<FitPoint> {
    let mut rng = rng::stream(seed);
    let mut out = Vec::new();
    for &eps_r in eps_rs {
        for &chi in chis {
            if chi <= chi_c {
                continue;
            }
            let clean = (chi - chi_c).powf(gamma) / (eps_r - eps_gs).powf(delta);
            let z: f64 = rng.sample(StandardNormal);
            let factor = (1.0 + noise * z).max(1e-3);
            out.push(FitPoint { chi, eps_r, ratio: clean * factor });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chis() -> Vec<f64> {
        (0..16).map(|k| 3.6 + 0.03 * 10f64.powf(k as f64 * 2.0 / 15.0)).collect()
    }

    #[test]
    fn noiseless_round_trip() {
        let pts = synthetic_table(1.2, 2.0, 3.6, -1.5, &chis(), &[-1.45, -1.4, -1.3, -1.2], 0.0, 0);
        let fit = fit_exponents(&pts, -1.5).unwrap();
        assert!((fit.gamma - 1.2).abs() < 1e-6, "{fit:?}");
        assert!((fit.delta.unwrap() - 2.0).abs() < 1e-6);
        assert!((fit.chi_c - 3.6).abs() < 1e-6);
        assert!(fit.rms_residual < 1e-8);
    }

    #[test]
    fn single_energy_fits_gamma_only() {
        let pts = synthetic_table(1.5, 2.0, 1.0, -1.5, &chis().iter().map(|c| c - 2.6).collect::<Vec<_>>(), &[-1.3], 0.0, 0);
        let fit = fit_exponents(&pts, -1.5).unwrap();
        assert!(fit.delta.is_none());
        assert!((fit.gamma - 1.5).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        let one = [FitPoint { chi: 4.0, eps_r: -1.3, ratio: 1.0 }; 5];
        assert!(matches!(fit_exponents(&one, -1.5), Err(Error::FitWindow(_))));
        let pts = synthetic_table(1.2, 2.0, 3.6, -1.5, &chis(), &[-1.3], 0.0, 0);
        assert!(fit_exponents(&pts, -1.2).is_err());
    }
}
