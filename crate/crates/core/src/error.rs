use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by field operations, estimators, solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("operation requires a 3-D grid, got dim = {0}")]
    UnsupportedDimension(usize),

    #[error("conjugate symmetry violated: relative defect {defect:.3e} exceeds {tolerance:.1e}")]
    SymmetryViolation { defect: f64, tolerance: f64 },

    #[error("input is not divergence-free: relative defect {defect:.3e} exceeds {tolerance:.1e}")]
    NotDivergenceFree { defect: f64, tolerance: f64 },

    #[error("radius {radius:.4e} is below the trusted lattice resolution {limit:.4e}")]
    ResolutionLimited { radius: f64, limit: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("non-monotone shell energy at radius {0:.4e}")]
    NonMonotone(f64),

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("numerical abort at t = {time:.6}: {reason}")]
    NumericalAbort { time: f64, reason: String },

    #[error("inconsistent provenance: {0}")]
    Provenance(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
