//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by state construction, entropy evaluation, smoothing,
/// measure evaluation, and channel application.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Operands disagree in party count, local dimension, or vector length.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A party subset is empty, improper, or out of range.
    #[error("invalid bipartition: {0}")]
    InvalidBipartition(String),

    /// An operation required a unit vector and got one with this squared norm.
    #[error("state is not a unit vector: squared norm {0}")]
    NotUnit(f64),

    /// An operation required a nonzero vector.
    #[error("zero vector")]
    ZeroVector,

    /// A weight vector that must be a probability distribution sums to this.
    #[error("weights are not normalized: sum {0}")]
    NotNormalized(f64),

    /// A weight vector contains a negative entry.
    #[error("negative weight {weight} at index {index}")]
    NegativeWeight { index: usize, weight: f64 },

    /// A matrix that must be Hermitian deviates from its adjoint by this much.
    #[error("matrix is not Hermitian: deviation {0}")]
    NotHermitian(f64),

    /// A matrix that must be positive semidefinite has this eigenvalue.
    #[error("matrix is not positive semidefinite: eigenvalue {0}")]
    NotPositive(f64),

    /// A scalar argument is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A request exceeds the documented size caps.
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    /// Ensemble labels collide, or a channel's register alphabet does not
    /// cover the branch labels it is applied to.
    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    /// A serialized object failed to parse or validate.
    #[error("invalid JSON: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;
