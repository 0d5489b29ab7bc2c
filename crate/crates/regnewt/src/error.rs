//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by construction, evaluation and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("vectors live in different weighted spaces ({0})")]
    WeightMismatch(&'static str),

    #[error("weights must be strictly positive (index {0})")]
    NonPositiveWeight(usize),

    #[error("operator does not support this operation: {0}")]
    UnsupportedOperator(&'static str),

    #[error("operator norm {norm:.6e} exceeds the admissible bound {bound:.6e}")]
    ScalingViolation { norm: f64, bound: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("nu = {nu} exceeds the qualification {qualification} of this filter family")]
    QualificationExceeded { nu: f64, qualification: f64 },

    #[error("schedule is incompatible with this filter family: {0}")]
    ScheduleCompatibility(String),

    #[error("ill-posed problem instance: {0}")]
    IllPosedInstance(String),

    #[error("degenerate problem: {0}")]
    DegenerateProblem(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
