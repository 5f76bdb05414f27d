use thiserror::Error;

/// Errors raised by operator construction, solvers and oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear system is numerically singular (reciprocal condition estimate {rcond:.3e})")]
    Singular { rcond: f64 },

    #[error("spectral parameter {zeta} lies within {distance:.3e} of pole {pole}")]
    PoleProximity { zeta: f64, pole: String, distance: f64 },

    #[error("steady state is not unique: kernel dimension {dim} (singular-value gap {gap:.3e})")]
    NonUniqueSteadyState { dim: usize, gap: f64 },

    #[error("pole extraction failed after {attempts} shifts")]
    ShiftFailure { attempts: usize },

    #[error("unsupported representation: {0}")]
    Unsupported(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
