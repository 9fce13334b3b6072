use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Io,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate depth range: {0}")]
    DegenerateRange(String),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("requested {requested} samples but only {available} valid pixels")]
    TooFewValidPixels { requested: usize, available: usize },
    #[error("cannot reach removed fraction inside [{lo}, {hi}]")]
    InfeasibleRange { lo: f64, hi: f64 },
    #[error("conditioning mask selects no pixels")]
    EmptyConditioning,
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDivergence { iterations: usize, residual: f64 },
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("no reliable pixels remain after certainty masking")]
    EmptyReliableSet,
    #[error("scale-shift fit is singular: {0}")]
    SingularFit(String),
    #[error("evaluation mask selects no pixels")]
    EmptyMask,
    #[error("non-positive depth inside evaluation mask")]
    NonPositiveDepth,
    #[error("at least two pixels are needed for rank correlation, found {0}")]
    InsufficientPairs(usize),
    #[error("invalid depth value {value} at index {index}")]
    InvalidDepth { index: usize, value: f64 },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io(_) | Error::MalformedHeader(_) => ErrorKind::Io,
            Error::InvalidConfig(_) | Error::InvalidRange(_) | Error::DimensionMismatch { .. } => {
                ErrorKind::Config
            }
            _ => ErrorKind::Numerical,
        }
    }

    pub(crate) fn dims(expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}
