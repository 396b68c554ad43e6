use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of a cost function or metric.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent sizes, dangling ids, malformed graph objects.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("OD pair {origin} -> {destination} is not connected")]
    Disconnected { origin: u64, destination: u64 },

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical error at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("mapping error: {0}")]
    Mapping(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("degenerate instance: {0}")]
    Degenerate(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the instance itself (unreachable demand),
    /// as opposed to malformed input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(self, Error::Disconnected { .. } | Error::Infeasible(_))
    }
}
