use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The target variance cannot be reached with any base `K > 1`.
    #[error(
        "no valid K for L={layers}, n={width}, V={variance}: \
         log_(2/n)(V) + (L-1) = {rhs} must be positive"
    )]
    NoValidK {
        layers: usize,
        width: usize,
        variance: f64,
        rhs: f64,
    },

    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("corrupt record {index} in {path}: {reason}")]
    CorruptRecord {
        path: PathBuf,
        index: usize,
        reason: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Loss or gradients became non-finite during training.
    #[error("numeric divergence at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
