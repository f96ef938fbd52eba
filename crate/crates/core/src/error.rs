use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfgError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("grid mismatch: expected {expected} nodes, got {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("unsupported Hölder order {0}")]
    UnsupportedOrder(f64),

    #[error("incompatible data: {0}")]
    Incompatible(String),

    #[error("CFL condition violated: dt * max drift / dx = {0:.6} > 1")]
    Cfl(f64),

    #[error("no convergence after {iterations} iterations (last gap {last_gap:e})")]
    NonConvergence {
        iterations: usize,
        last_gap: f64,
        gap_history: Vec<f64>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, MfgError>;
