//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MopError {
    /// Invalid argument or configuration value.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Not enough samples for the requested model.
    #[error("insufficient data: {required} samples required, {available} available ({context})")]
    InsufficientData {
        required: usize,
        available: usize,
        context: String,
    },

    /// A factorization or solve failed.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Response (or input) without variation.
    #[error("degenerate response: {0}")]
    DegenerateResponse(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// A cross-validation fold failed to fit.
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<MopError>,
    },

    #[error("i/o error")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, MopError>;

impl MopError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        MopError::Parameter(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        MopError::Numerical(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        MopError::DegenerateResponse(msg.into())
    }

    /// True for errors caused by the user's data or arguments rather than the environment.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, MopError::Io(_))
    }
}

impl From<csv::Error> for MopError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => MopError::Io(io),
                other => MopError::Format(format!("{other:?}")),
            }
        } else {
            MopError::Format(e.to_string())
        }
    }
}

impl From<serde_json::Error> for MopError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            MopError::Io(e.into())
        } else {
            MopError::Format(e.to_string())
        }
    }
}
