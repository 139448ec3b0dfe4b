//! `iqo` command-line driver.
//!
//! Exit codes: 0 success, 1 internal state error, 2 I/O or unreadable input,
//! 3 fit window, 64 usage.

mod cli;
mod commands;
mod config;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};
use config::Config;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Parse(String),
    Core(iqo::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Io(_) | CliError::Parse(_) => 2,
            CliError::Core(e) => match e {
                iqo::Error::InvalidArgument(_) | iqo::Error::ResourceLimit(_) => 64,
                iqo::Error::Io(_) | iqo::Error::Parse(_) => 2,
                iqo::Error::FitWindow(_) => 3,
                iqo::Error::InvalidState(_) => 1,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
            CliError::Parse(m) => write!(f, "parse: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<iqo::Error> for CliError {
    fn from(e: iqo::Error) -> Self {
        CliError::Core(e)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = Config::load(cli.config.as_deref())?;
    if let Some(jobs) = cfg.opt(cli.jobs, "jobs")? {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    }
    match cli.command {
        Command::Gen(a) => commands::gen(a, &cfg),
        Command::Spectrum(a) => commands::spectrum(a, &cfg),
        Command::Cycle(a) => commands::cycle(a, &cfg),
        Command::Run(a) => commands::run(a, &cfg),
        Command::Basin(a) => commands::basin(a, &cfg),
        Command::Fit(a) => commands::fit(a, &cfg),
        Command::Phase(a) => commands::phase(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(64) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iqo: {e}");
            ExitCode::from(e.code())
        }
    }
}
