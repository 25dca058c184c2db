//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error: {what} = {value}")]
    Domain { what: &'static str, value: f64 },

    /// A model, grid or cost parameter is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A non-finite value appeared during a computation.
    #[error("non-finite value in {context} at index {index}")]
    NonFinite { context: &'static str, index: usize },

    /// The requested computation does not apply to this model.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A matrix needed by a closed form is singular.
    #[error("singular system: {0}")]
    Singular(String),

    /// A series or ladder did not reach its truncation criterion.
    #[error("no convergence: {0}")]
    Convergence(String),

    /// The thinning bound was exceeded by the intensity.
    #[error("thinning bound violated at t = {t}: intensity {intensity} > bound {bound}")]
    BoundViolation { t: f64, intensity: f64, bound: f64 },
}

impl Error {
    /// True for errors caused by user input rather than by numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Domain { .. } | Error::Unsupported(_)
        )
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
