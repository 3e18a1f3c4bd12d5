//! Error types shared across the crate.
//!
//! Every failure is classified into one of three classes so that callers
//! (in particular the CLI) can distinguish "the input was malformed" from
//! "the computation would exceed its resource budget" from "a quantitative
//! property that should always hold was violated".

use thiserror::Error;

/// Failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input, violated precondition, rejected hypothesis. Exit 2.
    Validation,
    /// A configured resource budget (lattice size, node count) was exceeded. Exit 3.
    Budget,
    /// A quantitative property that is supposed to hold was observed false. Exit 4.
    PropertyViolation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("scale mismatch: {0}")]
    ScaleMismatch(String),

    #[error("requested scale is finer than the native scale of the input ({0})")]
    ScaleTooFine(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("support has diameter zero; uniform perfectness is undefined for atoms")]
    AtomicSupport,

    #[error("projections are parallel (operator distance below tolerance)")]
    ParallelProjections,

    #[error("map is not grid-aligned: {0}")]
    NotGridAligned(String),

    #[error("contraction certificate failed: {0}")]
    ContractionCertificate(String),

    #[error("curve certificate failed: {0}")]
    CurveCertificate(String),

    #[error("spreading hypothesis rejected: {0}")]
    HypothesisRejected(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("property violated: {0}")]
    PropertyViolated(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::BudgetExceeded(_) => ErrorClass::Budget,
            Error::PropertyViolated(_) => ErrorClass::PropertyViolation,
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
