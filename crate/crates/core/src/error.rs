use thiserror::Error;

use crate::spectra::DressedLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {entries} entries for dimension {dim}")]
    NotSquare { dim: usize, entries: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian: max |H - H^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("Jacobi eigensolver did not converge for a {dim}x{dim} matrix after {sweeps} sweeps")]
    NoConvergence { dim: usize, sweeps: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cutoff policy cannot be resolved: {0}")]
    UnresolvablePolicy(String),

    #[error("singular detuning: omega_a == omega_r")]
    SingularDetuning,

    #[error("degenerate zeroth-order levels {a} and {b} (gap {gap:e}); non-degenerate theory does not apply")]
    Degeneracy { a: DressedLabel, b: DressedLabel, gap: f64 },

    #[error("truncation did not converge by n_max = {n_max}: last change {last_delta:e}")]
    TruncationNotConverged { n_max: usize, last_delta: f64 },

    #[error("ambiguous level tracking for {0}")]
    AmbiguousTracking(DressedLabel),
}

pub type Result<T> = std::result::Result<T, Error>;
