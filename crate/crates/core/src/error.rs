use thiserror::Error;

/// Errors raised by the geometry, energy and flow operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: &'static str, reason: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("input error at line {line}: {reason}")]
    Input { line: usize, reason: String },

    #[error("degenerate face {face}: area {area:e} below threshold {threshold:e}")]
    DegenerateFace { face: usize, area: f64, threshold: f64 },

    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("chart point ({u}, {v}) outside the domain of {surface}")]
    Domain { surface: String, u: f64, v: f64 },

    #[error("non-finite value {what} at {location}")]
    Numerical { what: String, location: String },

    #[error("functional undefined: {0}")]
    UndefinedFunctional(String),

    #[error("outside theorem hypotheses: {0}")]
    Hypothesis(String),

    #[error("sphere fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter { field, reason: reason.into() }
}
