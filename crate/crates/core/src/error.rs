use thiserror::Error;

/// Errors raised while building, solving, or serializing a localization problem.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed instance: {0}")]
    Malformed(String),

    #[error("duplicate edge between nodes {0} and {1}")]
    DuplicateEdge(usize, usize),

    #[error("sensor {sensor} cannot reach any anchor (every sensor must be connected to an anchor, directly or through other sensors)")]
    Disconnected { sensor: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value encountered at sweep {sweep}")]
    Diverged { sweep: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
