use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Numerical,
    Convergence,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (eigenvalue {eigenvalue:e} at or below threshold {threshold:e})")]
    NotPositiveDefinite { eigenvalue: f64, threshold: f64 },

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("under-determined problem: n = {n} observations for p = {p} variables (need n > p)")]
    UnderDetermined { n: usize, p: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("correlation undefined: column {column} of {which} is constant")]
    UndefinedCorrelation { which: &'static str, column: usize },

    #[error("no convergence after {iterations} iterations (off-diagonal residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_)
            | Error::InvalidConfig(_)
            | Error::DimensionMismatch(_)
            | Error::IndexOutOfRange { .. }
            | Error::Domain(_)
            | Error::UndefinedCorrelation { .. }
            | Error::Parse { .. } => ErrorClass::Config,
            Error::Io { .. } => ErrorClass::Io,
            Error::NotPositiveDefinite { .. }
            | Error::Singular(_)
            | Error::UnderDetermined { .. }
            | Error::DegenerateInput(_) => ErrorClass::Numerical,
            Error::Convergence { .. } => ErrorClass::Convergence,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
