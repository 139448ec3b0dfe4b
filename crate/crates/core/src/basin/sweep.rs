use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auto_bz_hi, count_crossings, BasinEnsemble, CrossingCounts};
use crate::error::{invalid, Result};
use crate::io::fmt_f64;
use crate::rng;

const BOOTSTRAP_RESAMPLES: usize = 200;

/// Disorder-averaged crossing statistics for one `(chi, eps_r)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub chi: f64,
    pub eps_r: f64,
    /// Mean `𝒩_>` per replica.
    pub n_above: f64,
    /// Mean `𝒩_<` per replica.
    pub n_below: f64,
    /// `Σ 𝒩_> / Σ 𝒩_<` over replicas; `None` when nothing below crossed.
    pub ratio: Option<f64>,
    /// Bootstrap standard error of `ratio` over replicas.
    pub stderr: Option<f64>,
    pub reps: usize,
    pub seed: u64,
}

/// Runs `reps` replicas per reference energy. Replica `k` uses the same seed
/// for every `eps_r` and every slope, so cells differ only through the
/// conditioning parameter. Rows come out ordered by `eps_r` then `chi`, as
/// given.
pub fn ratio_sweep<F>(
    factory: F,
    chis: &[f64],
    eps_rs: &[f64],
    reps: usize,
    grid: usize,
    seed: u64,
) -> Result<Vec<SweepRow>>
where
    F: Fn(f64, u64) -> Result<BasinEnsemble> + Sync,
{
    if chis.is_empty() || eps_rs.is_empty() {
        return invalid("sweep needs at least one slope and one reference energy");
    }
    if reps == 0 {
        return invalid("sweep needs at least one replica");
    }
    let jobs: Vec<(usize, usize)> = (0..eps_rs.len()).flat_map(|e| (0..reps).map(move |r| (e, r))).collect();
    // counts[e][r][c]
    let per_job: Vec<Vec<CrossingCounts>> = jobs
        .par_iter()
        .map(|&(e, r)| {
            let ens = factory(eps_rs[e], rng::derive_seed(seed, r as u64))?;
            chis.iter()
                .map(|&chi| count_crossings(&ens, chi, auto_bz_hi(&ens, chi), grid))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(eps_rs.len() * chis.len());
    for (e, &eps_r) in eps_rs.iter().enumerate() {
        let reps_of = &per_job[e * reps..(e + 1) * reps];
        for (c, &chi) in chis.iter().enumerate() {
            let above: Vec<f64> = reps_of.iter().map(|j| j[c].n_above as f64).collect();
            let below: Vec<f64> = reps_of.iter().map(|j| j[c].n_below as f64).collect();
            let (ratio, stderr) = ratio_with_bootstrap(&above, &below, rng::derive_seed(seed, 0xB00 + (e * chis.len() + c) as u64));
            rows.push(SweepRow {
                chi,
                eps_r,
                n_above: above.iter().sum::<f64>() / reps as f64,
                n_below: below.iter().sum::<f64>() / reps as f64,
                ratio,
                stderr,
                reps,
                seed,
            });
        }
    }
    Ok(rows)
}

fn ratio_with_bootstrap(above: &[f64], below: &[f64], seed: u64) -> (Option<f64>, Option<f64>) {
    let sb: f64 = below.iter().sum();
    if sb == 0.0 {
        return (None, None);
    }
    let ratio = above.iter().sum::<f64>() / sb;
    let k = above.len();
    if k == 1 {
        return (Some(ratio), Some(0.0));
    }
    let mut rng = rng::stream(seed);
    let mut samples = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..k {
            let i = rng.random_range(0..k);
            a += above[i];
            b += below[i];
        }
        if b > 0.0 {
            samples.push(a / b);
        }
    }
    let m = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (samples.len().max(2) - 1) as f64;
    (Some(ratio), Some(var.sqrt()))
}

/// CSV `chi,eps_r,n_above,n_below,ratio,stderr,seed`; undefined ratios are
/// written as `nan`.
pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> std::io::Result<()> {
    writeln!(out, "chi,eps_r,n_above,n_below,ratio,stderr,seed")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(r.chi),
            fmt_f64(r.eps_r),
            fmt_f64(r.n_above),
            fmt_f64(r.n_below),
            fmt_f64(r.ratio.unwrap_or(f64::NAN)),
            fmt_f64(r.stderr.unwrap_or(f64::NAN)),
            r.seed
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bootstrap_edge_cases() {
        assert_eq!(ratio_with_bootstrap(&[3.0], &[0.0], 1), (None, None));
        assert_eq!(ratio_with_bootstrap(&[3.0], &[2.0], 1), (Some(1.5), Some(0.0)));
        let (r, s) = ratio_with_bootstrap(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0], 1);
        assert_eq!(r, Some(1.0));
        assert!(s.unwrap() > 0.0);
    }
}
