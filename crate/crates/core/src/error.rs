use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SleError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("CFL condition violated: dt = {dt:e} exceeds dt_max = {dt_max:e}")]
    CflViolation { dt: f64, dt_max: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, SleError>;
