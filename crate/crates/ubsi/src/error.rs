//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("invalid parameter {name}: {reason} (got {value})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("extra dimension count m={0} unsupported: kernel is only bounded for m >= 3")]
    UnsupportedExtraDim(usize),

    #[error(
        "quadrature did not reach relative tolerance {target:.3e} after {refinements} refinements (last delta {achieved:.3e})"
    )]
    ToleranceFailure {
        target: f64,
        achieved: f64,
        refinements: usize,
    },

    #[error("shrunken domain is empty: {0}")]
    EmptyShrunkenDomain(String),

    #[error("radius {r} out of range (0, {max}]")]
    RadiusOutOfRange { r: f64, max: f64 },

    #[error("operator hypothesis {operator} >= {bound} violated at {point:?}: value {value}")]
    HypothesisViolated {
        operator: String,
        bound: f64,
        point: Vec<f64>,
        value: f64,
    },

    #[error("unknown catalog field {name:?}")]
    UnknownField { name: String },

    #[error("field parameter error for {name:?}: {reason}")]
    FieldParameter { name: String, reason: String },

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
