use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Near-singular matrix; the inner value is the estimated condition number.
    #[error("singular or ill-conditioned matrix (condition estimate {0:.3e})")]
    Singular(f64),

    #[error("index {index} out of range (size {size})")]
    Index { index: usize, size: usize },

    /// Not enough feedback history to build agent states yet.
    #[error("not ready: {0}")]
    NotReady(String),

    /// A per-stream map is missing an entry.
    #[error("incomplete input: {0}")]
    Incomplete(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
