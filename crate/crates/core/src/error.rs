use thiserror::Error;

/// Errors raised while evaluating metrics, fields and derived tensors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FinslerError {
    /// A sub-expression produced a non-finite value (sqrt of a negative, log of zero, ...).
    #[error("domain error in `{expr}`: {detail}")]
    Domain { expr: String, detail: String },

    /// The sampled point violates the admissibility conditions of the metric.
    #[error("inadmissible point: {0}")]
    Inadmissible(String),

    /// Expression text could not be parsed.
    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("expansion order {order} is below the minimum {min}")]
    OrderTooLow { order: usize, min: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, FinslerError>;
