//! Iterative reference-state quantum optimization of Sherrington–Kirkpatrick
//! spin glasses.
//!
//! - [`sk`]: instances, spin strings and classical energies.
//! - [`classical`]: descent, simulated annealing, exhaustive minima and basins.
//! - [`quantum`]: the reference-field transverse Ising Hamiltonian, spectra,
//!   time evolution and measurement.
//! - [`protocol`]: the four-step optimization cycle and its slope tuner.
//! - [`basin`]: the isolated-minimum crossing model, ratio sweeps and the
//!   critical-exponent fit.

pub mod basin;
pub mod classical;
pub mod error;
pub mod io;
pub mod protocol;
pub mod quantum;
pub mod rng;
pub mod sk;

pub use error::{Error, Result};
