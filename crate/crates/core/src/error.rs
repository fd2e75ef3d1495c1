//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid generator or solver configuration (empty ranges, bad flags).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed inputs: unknown ids, dimension mismatches, non-positive factors.
    #[error("domain error: {0}")]
    Domain(String),

    /// Problem size exceeds a hard resource cap.
    #[error("capacity error: {what} requires {requested}, cap is {cap}")]
    Capacity {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
