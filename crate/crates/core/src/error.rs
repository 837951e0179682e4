use std::path::PathBuf;

use crate::integrator::TrajectoryState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A non-finite coefficient appeared during time stepping. Carries the
    /// last finite state so it can be checkpointed.
    #[error("blow-up at t = {time}: last finite |X|_0 = {last_norm}")]
    BlowUp {
        time: f64,
        last_norm: f64,
        state: Box<TrajectoryState>,
    },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("config hash mismatch: checkpoint {found:#018x}, config {expected:#018x}")]
    ConfigMismatch { expected: u64, found: u64 },

    #[error("{path}:{line}: key `{key}`: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        key: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    /// Not enough data for a statistical diagnostic.
    #[error("diagnostic: {0}")]
    Diagnostic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
