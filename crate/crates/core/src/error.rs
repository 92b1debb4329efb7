use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An index, scale or window bound is out of range.
    #[error("range error: {0}")]
    Range(String),

    /// A hypergeometric parameter sits on a pole.
    #[error("pole: {0}")]
    Pole(String),

    /// The requested accuracy cannot be delivered on the given data.
    #[error("precision error: {0}")]
    Precision(String),

    /// The operation is not supported for this input (missing profile, degenerate family).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Configuration failed validation.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }
}
