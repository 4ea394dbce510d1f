//! Intermediate rotating wave approximation (IRWA) for qubit–resonator
//! systems.
//!
//! The crate builds the Jaynes–Cummings, quantum Rabi and time-averaged
//! Rabi Hamiltonians on a truncated Fock space, diagonalises them, and
//! provides the closed-form perturbative and dispersive results that
//! interpolate between the two limits. Units: hbar = 1, frequencies in units
//! of the resonator frequency unless a caller chooses otherwise.

pub mod averaging;
pub mod dispersive;
pub mod error;
pub mod models;
pub mod numerics;
pub mod perturbation;
pub mod quantize;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
