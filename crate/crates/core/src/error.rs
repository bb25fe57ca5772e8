use thiserror::Error;

use crate::model::ProblemKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("denominator vanishes at x = {x:?}")]
    DenominatorVanishes { x: Vec<f64> },

    #[error("denominator {index} is not sign-definite over the domain (value {value:e} at x = {witness:?})")]
    SignIndefiniteDenominator {
        index: usize,
        witness: Vec<f64>,
        value: f64,
    },

    #[error("operation requires a {expected:?} problem, got {actual:?}")]
    WrongKind {
        expected: ProblemKind,
        actual: ProblemKind,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid problem: {0}")]
    Validation(String),

    #[error("parse error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("no feasible point found on the search grid")]
    NoFeasiblePoint,

    #[error("problem too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn dim(what: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            what,
            expected,
            actual,
        }
    }
}
