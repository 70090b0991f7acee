use thiserror::Error;

use crate::orders::OrderVerdict;

/// Errors raised by the toolkit. Every variant names the offending field or
/// value so callers can surface it verbatim.
#[derive(Debug, Error)]
pub enum SteinError {
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("empty grid: {0}")]
    EmptyGrid(String),

    #[error("negative weight {value} at `{field}` index {index}")]
    NegativeWeight {
        field: String,
        index: usize,
        value: f64,
    },

    #[error("distribution is not centered: mean offset {offset:e} exceeds {tolerance:e}")]
    NotCentered { offset: f64, tolerance: f64 },

    #[error("distribution has zero variance")]
    ZeroVariance,

    #[error("support point {x} carries positive mass but must be nonnegative")]
    NegativeSupport { x: f64 },

    #[error("mean is {0}; a positive mean is required")]
    NonPositiveMean(f64),

    #[error("operation requires a {expected} distribution")]
    WrongKind { expected: &'static str },

    #[error("missing constant `{0}`")]
    MissingConstant(&'static str),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shift {c} is not a multiple of the atom spacing {spacing}")]
    MisalignedShift { c: f64, spacing: f64 },

    #[error("stochastic domination does not hold (margin {:e} at t = {})", .0.margin, .0.worst_point)]
    NotDominated(Box<OrderVerdict>),

    #[error("variances differ: {a} vs {b}")]
    VarianceMismatch { a: f64, b: f64 },

    #[error("density vanishes at {x} inside ({lo}, {hi})")]
    DensityZero { x: f64, lo: f64, hi: f64 },

    #[error("{0}")]
    Unsupported(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SteinError>;

pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> SteinError {
    SteinError::InvalidParameter {
        field: field.to_string(),
        reason: reason.into(),
    }
}
