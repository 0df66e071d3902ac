use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was asked for values outside its domain of definition.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed input text; `line` is 1-based.
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    /// Mass escaping through the box boundary exceeded the allowed budget.
    #[error("ambient box too small: leaked mass {leak:e} exceeds {max_leak:e}")]
    Truncation { leak: f64, max_leak: f64 },
    #[error("solver error: {0}")]
    Solver(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
