use thiserror::Error;

/// Errors raised across the library.
///
/// The harness maps [`Error::Validation`] to exit code 2 and
/// [`Error::Capacity`] to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The instance is too big for an exhaustive computation.
    #[error("capacity exceeded: {what} needs {needed}, cap is {cap}; {hint}")]
    Capacity {
        what: String,
        needed: u128,
        cap: u128,
        hint: String,
    },

    /// A configuration that cannot be run (e.g. an empty experiment support).
    #[error("configuration error: {0}")]
    Config(String),

    /// One or more validation failures, each prefixed with a field path.
    #[error("validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    /// A constructed chain violates a structural property it must have.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn capacity(what: impl Into<String>, needed: u128, cap: u128, hint: &str) -> Self {
        Error::Capacity {
            what: what.into(),
            needed,
            cap,
            hint: hint.to_string(),
        }
    }
}
