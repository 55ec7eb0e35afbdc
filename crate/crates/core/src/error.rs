//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong in simulation, analysis, fitting, or I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller handed us inconsistent or out-of-range inputs.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An iterative fit failed to reach its tolerance.
    #[error("fit did not converge: {0}")]
    FitFailure(String),

    /// A simulated potential left the plausible range (NaN, inf, or runaway).
    #[error("numerical divergence: {0}")]
    Divergence(String),

    /// A resource limit (iteration or event cap) was exhausted.
    #[error("resource limit exceeded: {0}")]
    ResourceExhausted(String),

    /// Underlying file-system failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed serialized data.
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
