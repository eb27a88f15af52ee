use thiserror::Error;

/// Errors produced by the simulation, objective and optimizer layers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{model} requires at least {min} qubits, got {got}")]
    TooFewQubits {
        model: &'static str,
        min: usize,
        got: usize,
    },

    #[error("eigendecomposition did not converge for a {dim}x{dim} matrix")]
    EigenFailed { dim: usize },

    #[error("non-finite {what} encountered{}", coordinate.map(|c| format!(" at coordinate {c}")).unwrap_or_default())]
    NonFinite {
        what: &'static str,
        coordinate: Option<usize>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    InvalidInput(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
