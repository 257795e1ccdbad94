//! Error types shared across the estimation pipeline.

use thiserror::Error;

/// Errors produced by the simulation and estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The drift returned a non-finite value during simulation.
    #[error("drift evaluation returned a non-finite value at state {state}")]
    NonFiniteDrift { state: f64 },

    /// The invariant density cannot be normalized (e.g. the drift is not
    /// mean-reverting and the unnormalized density diverges).
    #[error("invariant density is not normalizable: {0}")]
    UnnormalizableDensity(String),

    /// The basis construction failed its empirical orthonormality check.
    #[error("basis construction failed: empirical Gram deviation {deviation:e} exceeds {tolerance:e}")]
    BasisNotOrthonormal { deviation: f64, tolerance: f64 },

    /// An internal consistency assertion failed.
    #[error("internal error: {0}")]
    Internal(String),

    /// A configuration file could not be parsed or fails validation.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
