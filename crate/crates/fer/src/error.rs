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
    #[error("{origin}, row {row}: {message}")]
    Row { origin: String, row: usize, message: String },
    #[error("{0}")]
    Format(String),
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("{path}, line {line}: {message}")]
    Config { path: PathBuf, line: usize, message: String },
    #[error("ensemble member {index} ({path}): {source}")]
    Member {
        index: usize,
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Core(#[from] fer_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("not a weights file (bad magic)")]
    BadMagic,
    #[error("weights file truncated: {0}")]
    Truncated(String),
    #[error("weights manifest is malformed: {0}")]
    Manifest(String),
    #[error("tensor shape mismatch for {name}: file has {found:?}, architecture expects {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("layer stack in file does not match architecture {0}")]
    ArchMismatch(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Numeric aborts (non-finite loss or gradient) as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Core(e) => matches!(
                e,
                fer_core::Error::NonFiniteGradient { .. } | fer_core::Error::NonFiniteLoss { .. }
            ),
            Error::Member { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
