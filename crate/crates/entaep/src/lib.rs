//! Smoothing, regularization, and monotonicity machinery for multipartite
//! entanglement measures, at desk scale with exact tolerances.

pub mod entropy;
pub mod error;
pub mod locc;
pub mod measures;
pub mod random;
pub mod serial;
pub mod smoothing;
pub mod tensor;

pub use error::{Error, Result};
