//! Error type shared across the crate.
//!
//! Validation failures name the violated invariant so that a rejected input
//! document can be fixed without reading the source. Numerical failures keep
//! enough context (the offending value) to reproduce the call.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// The input document is not syntactically valid JSON.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// The document parsed but violates a structural invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A truncation window cannot hold the requested structure.
    #[error("window too small: {0}")]
    WindowTooSmall(String),

    /// An iterative or dense solver failed to produce a usable result.
    #[error("solver failure: {0}")]
    Solver(String),

    /// The requested operation is only defined for a restricted input class.
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// An eigenvalue that must be simple is degenerate.
    #[error("degenerate eigenvalue: {0}")]
    Degenerate(String),

    /// A scalar potential was evaluated at one of its poles.
    #[error("evaluation at a pole: lambda = {0}")]
    PoleAt(f64),

    /// Unknown builtin example name or bad parameter set.
    #[error("unknown example: {0}")]
    UnknownExample(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wrap a `serde_json` error, keeping its location.
    pub fn from_json(err: serde_json::Error) -> Self {
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
