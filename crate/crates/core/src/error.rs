use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the range where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("classically forbidden: E - V = {deficit:.6e} at x = {x} (imaginary momentum magnitude {imaginary:.6e})")]
    Forbidden { x: f64, deficit: f64, imaginary: f64 },

    #[error("undefined velocity for term (n={n}, m={m}, {sign1}, {sign2}): constant phase")]
    UndefinedVelocity { n: u32, m: u32, sign1: char, sign2: char },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid coefficient set: {0}")]
    Construction(String),

    #[error("operation not supported for {model}: {what}")]
    Unsupported { model: &'static str, what: String },

    #[error("no bundle with speed {0}")]
    UnknownBundle(f64),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io { path: path.into(), message: err.to_string() }
    }

    /// Errors caused by a numerical method rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalFailure(_) | Error::Consistency(_) | Error::DegenerateSpectrum(_))
    }
}
