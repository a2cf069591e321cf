use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("unstable configuration: {0}")]
    Stability(String),
    #[error("outside the admissible regime: {0}")]
    Regime(String),
    #[error("grid resolution too coarse: {0}")]
    Resolution(String),
    #[error("packing failed: {0}")]
    Packing(String),
    #[error("KL divergence is infinite: {0}")]
    Divergence(String),
    #[error("run aborted at step {step}: {reason}")]
    Aborted { step: usize, reason: String },
    #[error("config schema error in field `{field}`: {msg}")]
    Schema { field: String, msg: String },
    #[error("no data: {0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
