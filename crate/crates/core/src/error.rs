use thiserror::Error;

/// Errors raised by the simulator and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (non-positive
    /// distance, point off the plate, profile not covering the plate...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid model or numerical configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Least-squares fit could not be formed.
    #[error("fit error: {0}")]
    Fit(String),

    /// Brute-force voltage scan found its minimum on the window edge.
    #[error("scan error: {0}")]
    Scan(String),

    /// A prediction whose formula divides by a vanishing quantity.
    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    /// Malformed input row.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
