use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A quantity that is undefined at the origin was evaluated there.
    #[error("{0} is undefined for the zero vector")]
    ZeroVector(&'static str),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Power iteration ran out of iterations; `estimate` is the last Rayleigh quotient.
    #[error("no convergence after {iterations} iterations (best estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
