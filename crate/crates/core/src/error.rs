use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the planning library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two positions that must differ coincide.
    #[error("coincident positions: {0}")]
    Coincident(String),

    /// A configuration value violates an invariant; `field` names it.
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    /// Two trajectories do not share a sampling grid.
    #[error("grid mismatch: relay has N = {relay}, peer has N = {peer}{detail}")]
    GridMismatch {
        relay: usize,
        peer: usize,
        detail: String,
    },

    /// Malformed input file.
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    /// Problem setup is unusable (for example a non-finite initial cost).
    #[error("setup error: {0}")]
    Setup(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
