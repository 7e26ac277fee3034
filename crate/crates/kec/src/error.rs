use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Core(#[from] kec_core::Error),
    #[error("corrupt {what}: {message}")]
    Corrupt { what: &'static str, message: String },
    #[error("unsupported {what} version {found} (expected {expected})")]
    Version { what: &'static str, found: u32, expected: u32 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss at seed {seed} epoch {epoch} step {step} (conversation {conv_id})")]
    NonFinite { seed: u64, epoch: usize, step: usize, conv_id: String },
    #[error("gradient check failed: max relative error {max_rel_error:.3e} above {tolerance:.1e}")]
    GradCheck { max_rel_error: f64, tolerance: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl ToString) -> Self {
        Self::Parse { path: path.into(), line, message: message.to_string() }
    }

    pub(crate) fn corrupt(what: &'static str, message: impl ToString) -> Self {
        Self::Corrupt { what, message: message.to_string() }
    }
}
