use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "iqo", version, about = "Iterative quantum optimization of SK spin glasses")]
pub struct Cli {
    /// JSON file with default flag values (flags on the command line win).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a random SK instance file.
    Gen(GenArgs),
    /// Spectrum of the reference-field Hamiltonian along a ray.
    Spectrum(SpectrumArgs),
    /// Run a single optimization cycle.
    Cycle(CycleArgs),
    /// Run the iterative protocol.
    Run(RunArgs),
    /// Crossing-ratio sweep of the isolated-minimum model, then fit.
    Basin(BasinArgs),
    /// Fit scaling exponents to a sweep table.
    Fit(FitArgs),
    /// First-order boundary of the isolated-minimum model.
    Phase(PhaseArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Coupling scale J.
    #[arg(long)]
    pub j: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How the reference minimum is chosen.
#[derive(Args, Debug)]
pub struct RefArgs {
    /// Reference bit-string in hex, or `anneal`.
    #[arg(long = "ref")]
    pub reference: Option<String>,
    /// Seed of the annealed reference.
    #[arg(long)]
    pub anneal_seed: Option<u64>,
    #[arg(long)]
    pub anneal_sweeps: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[command(flatten)]
    pub reference: RefArgs,
    /// Slope bx / bz of the ray (0 gives the classical limit).
    #[arg(long)]
    pub chi: Option<f64>,
    /// bz values: `a,b,c`, `lin:hi:lo:count` or `log:hi:lo:count`.
    #[arg(long)]
    pub bz_grid: Option<String>,
    /// Lowest k levels by Lanczos instead of dense diagonalization.
    #[arg(long)]
    pub low_k: Option<usize>,
    /// Basin-isolated levels instead of the full spectrum.
    #[arg(long)]
    pub isolate: bool,
    /// Also report the minimum gap (`global` or `first-dip`).
    #[arg(long)]
    pub gap: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CycleFlags {
    #[arg(long)]
    pub chi: Option<f64>,
    /// Step-2 field, or `auto` (from the enumerated minima when n <= 20).
    #[arg(long)]
    pub bz_max: Option<String>,
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    /// Step-3 duration, or `auto` for c / gap^2.
    #[arg(long)]
    pub tau3: Option<String>,
    /// Constant c of `--tau3 auto`.
    #[arg(long)]
    pub tau3_c: Option<f64>,
    /// Upper bound of `--tau3 auto`.
    #[arg(long)]
    pub tau3_cap: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct CycleArgs {
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[command(flatten)]
    pub reference: RefArgs,
    #[command(flatten)]
    pub cycle: CycleFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Start configuration in hex, or `random` (drawn from --start-seed).
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub start_seed: Option<u64>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[command(flatten)]
    pub cycle: CycleFlags,
    /// Annealing sweeps for the first reference (1 with t-hot 0 is a quench).
    #[arg(long)]
    pub anneal_sweeps: Option<usize>,
    #[arg(long)]
    pub t_hot: Option<f64>,
    #[arg(long)]
    pub t_cold: Option<f64>,
    #[arg(long)]
    pub no_tuner: bool,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub tune_up: Option<f64>,
    #[arg(long)]
    pub tune_down: Option<f64>,
    /// Enumerate the ground state (n <= 20), stop on reaching it and report.
    #[arg(long)]
    pub oracle: bool,
    /// Record the first-dip gap of every cycle (costly).
    #[arg(long)]
    pub track_gap: bool,
    /// JSON-lines log, one cycle per line after a metadata line.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Summary JSON path (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where the isolated-minimum energies come from.
#[derive(Args, Debug)]
pub struct SamplerArgs {
    /// `calibrated`, `gaussian:MEAN:SD` or `uniform:LO:HI` (per-spin, model units).
    #[arg(long)]
    pub sampler: Option<String>,
    /// System size of the enumeration behind `calibrated`.
    #[arg(long)]
    pub calib_n: Option<usize>,
    #[arg(long)]
    pub calib_instances: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BasinArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub curves: Option<usize>,
    /// Slopes: `a,b,c`, `lin:a:b:count` or `log:a:b:count`.
    #[arg(long)]
    pub chis: Option<String>,
    /// Reference energies per spin (model units), same list syntax.
    #[arg(long)]
    pub eps_r_list: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Ground-state energy per spin used by the fit.
    #[arg(long, allow_hyphen_values = true)]
    pub eps_gs: Option<f64>,
    /// Replace the sweep by a synthetic table: `gamma=..,delta=..,chi_c=..`.
    #[arg(long)]
    pub synthetic: Option<String>,
    /// Multiplicative noise of the synthetic table.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Sweep CSV path.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Fit JSON path (stdout if absent).
    #[arg(long)]
    pub fit: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Sweep CSV written by `basin`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub eps_gs: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PhaseArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub curves: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub eps_r: Option<f64>,
    #[arg(long)]
    pub chis: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
