use std::path::PathBuf;

/// Errors raised anywhere in the clustering pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("numerical failure in {operation}: {detail}")]
    NumericalFailure {
        operation: &'static str,
        detail: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn numerical(operation: &'static str, detail: impl Into<String>) -> Self {
        Error::NumericalFailure {
            operation,
            detail: detail.into(),
        }
    }

    /// Process exit code for this error class: 2 validation, 3 numerical, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Validation(_)
            | Error::DegenerateInput(_)
            | Error::Parse { .. } => 2,
            Error::NumericalFailure { .. } => 3,
            Error::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
