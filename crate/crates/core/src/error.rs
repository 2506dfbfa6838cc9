//! Crate-wide error type.
//!
//! Errors split into two classes that front ends care about: *validation*
//! errors (bad sizes, bad parameters, malformed configuration) and
//! *degeneracy* errors (the data make a statistic undefined, e.g. a zero
//! sample variance or a non-positive variance estimate). [`Error::is_degenerate`]
//! exposes the class so callers can map every variant to a stable exit code.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not symmetric (max |a_ij - a_ji| = {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e} below -{tolerance:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64, tolerance: f64 },

    #[error("singular operator in {context}")]
    SingularOperator { context: &'static str },

    #[error("too few observations for {context}: n = {n}, need at least {min}")]
    TooFewObservations {
        context: &'static str,
        n: usize,
        min: usize,
    },

    #[error("configuration error: {message}")]
    Config { message: String },

    #[error("zero sample variance in coordinate {column}")]
    ZeroVariance { column: usize },

    #[error("degenerate denominator in {context}: value {value:e} not above {bound:e}")]
    DegenerateDenominator {
        context: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("degenerate response: residual sum of squares is zero")]
    DegenerateResponse,

    #[error("residualized column {column} has zero norm")]
    ZeroNormColumn { column: usize },
}

impl Error {
    /// True for errors caused by numerically degenerate data rather than by
    /// invalid inputs or configuration.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::ZeroVariance { .. }
                | Error::DegenerateDenominator { .. }
                | Error::DegenerateResponse
                | Error::ZeroNormColumn { .. }
        )
    }

    /// Short stable identifier, one per variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NotSymmetric { .. } => "not-symmetric",
            Error::NotPositiveSemidefinite { .. } => "not-psd",
            Error::SingularOperator { .. } => "singular-operator",
            Error::TooFewObservations { .. } => "too-few-observations",
            Error::Config { .. } => "config",
            Error::ZeroVariance { .. } => "zero-variance",
            Error::DegenerateDenominator { .. } => "degenerate-denominator",
            Error::DegenerateResponse => "degenerate-response",
            Error::ZeroNormColumn { .. } => "zero-norm-column",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(cond: bool, err: impl FnOnce() -> Error) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(err())
    }
}
