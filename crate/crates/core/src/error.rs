use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A trace is too short, empty, or otherwise unusable for the requested metric.
    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    /// Every run in a comparison was unstable, so no best run exists.
    #[error("no stable run available to select a best result")]
    NoStableRun,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// True for errors caused by user-supplied configuration.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidConfig(_) | Error::Json(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
