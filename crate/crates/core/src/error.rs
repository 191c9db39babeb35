use thiserror::Error;

/// Errors raised by graph construction, problem validation and the solvers.
#[derive(Debug, Error)]
pub enum FlrError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid edge ({j}, {k}): {reason}")]
    InvalidEdge { j: usize, k: usize, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("design column {0} has zero norm; the initial estimate is undefined")]
    DegenerateColumn(usize),

    #[error("system matrix is not positive definite (pivot {pivot}, value {value:e}); use lambda1 > 0")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("conjugate gradient breakdown at iteration {iteration}: operator is not positive definite")]
    PcgBreakdown { iteration: usize },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    PcgNotConverged { iterations: usize, residual: f64 },

    #[error("unsupported graph for this solver: {0}")]
    UnsupportedGraph(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FlrError>;
