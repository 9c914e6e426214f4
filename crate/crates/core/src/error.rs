//! Crate-wide error type.
//!
//! All fallible public operations return [`Result`]. Variants carry enough
//! context (dimensions, line numbers, offending values) for the CLI to print
//! actionable one-line diagnostics without re-deriving state.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the laboratory's operations.
#[derive(Debug)]
pub enum Error {
    /// A dimension or shape did not match what the operation requires.
    Dimension {
        what: &'static str,
        expected: String,
        got: String,
    },
    /// A parameter was outside its documented range.
    InvalidParam(String),
    /// An input was numerically degenerate (zero vector, dependent basis,
    /// exactly-zero network output, empty dataset, ...).
    Degenerate(String),
    /// Training aborted because the loss exceeded the divergence guard or
    /// became non-finite.
    Diverged { step: usize, loss: f64 },
    /// A training point does not lie on the declared subspace.
    OffSubspace { index: usize, residual: f64 },
    /// A CSV or config file failed to parse; `line` is 1-based.
    Parse { line: usize, msg: String },
    /// Underlying I/O failure.
    Io(std::io::Error),
    /// JSON (de)serialization failure.
    Json(serde_json::Error),
    /// CSV reader/writer failure.
    Csv(csv::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension {
                what,
                expected,
                got,
            } => write!(f, "dimension mismatch in {what}: expected {expected}, got {got}"),
            Error::InvalidParam(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::Diverged { step, loss } => {
                write!(f, "training diverged at step {step}: loss = {loss:e}")
            }
            Error::OffSubspace { index, residual } => write!(
                f,
                "data point {index} is off the subspace: ‖Π_perp x‖ = {residual:e}"
            ),
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
            Error::Csv(e) => write!(f, "csv error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            Error::Csv(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}

/// Shorthand for a [`Error::Dimension`] with formatted operands.
pub(crate) fn dim_err(what: &'static str, expected: impl fmt::Display, got: impl fmt::Display) -> Error {
    Error::Dimension {
        what,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
