use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pixel ({u}, {v}) is outside a {width}x{height} range image")]
    OutOfBounds {
        u: usize,
        v: usize,
        width: usize,
        height: usize,
    },

    #[error("circle fit failed: {0}")]
    FitFailure(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("estimate and reference trajectories do not overlap in time")]
    NoTemporalOverlap,

    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the contents or absence of input data, as
    /// opposed to programming or configuration mistakes.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Format { .. } | Error::Io { .. } | Error::EmptyInput(_) | Error::NoTemporalOverlap
        )
    }
}
