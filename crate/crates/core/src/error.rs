use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("segment bits sum to {got}, packet has {expected} bits")]
    SegmentMismatch { got: u64, expected: u64 },

    #[error("quadrature did not converge (error estimate {estimate:e}, tolerance {tolerance:e})")]
    Quadrature { estimate: f64, tolerance: f64 },

    #[error("invalid attenuation matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid interference context: {0}")]
    InvalidContext(String),

    #[error("node count {0} outside supported range 2..=12")]
    NodeCount(usize),

    #[error("node {node} is not a non-sink node of a {n_nodes}-node network")]
    NotANonSinkNode { node: usize, n_nodes: usize },

    #[error("cover probability is zero; average cover time is undefined")]
    UndefinedConditioning,

    #[error("multi-broadcast count must be at least 1")]
    ZeroRuns,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
