use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("time grids differ")]
    GridMismatch,
    #[error("non-finite value at node {j}, entry ({x}, {y})")]
    NonFinite { j: usize, x: usize, y: usize },
    #[error("series did not reach tolerance within {terms} terms (last bound {last_bound:e})")]
    NonConvergence { terms: usize, last_bound: f64 },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("quadrature resolution insufficient: estimate {estimate:e} exceeds budget {budget:e}")]
    Resolution { estimate: f64, budget: f64 },
}

pub type Result<T> = std::result::Result<T, HeatError>;

pub(crate) fn contract(msg: impl Into<String>) -> HeatError {
    HeatError::Contract(msg.into())
}
