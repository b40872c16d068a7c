//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by prior construction, samplers and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated its documented range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An input broke a structural contract (e.g. an asymmetric covariance matrix).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The prior spectrum is entirely zero; no subspace can be selected.
    #[error("degenerate prior: all eigenvalues are zero")]
    DegeneratePrior,

    /// The adapted covariance is not usable (not positive definite).
    #[error("adaptation state error: {0}")]
    AdaptationState(String),

    /// The requested subspace dimension exceeds the strictly positive part of
    /// the discrete spectrum.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A chain could not start (e.g. too few pre-run states passed the norm gate).
    #[error("startup error: {0}")]
    Startup(String),

    /// A diagnostic is undefined for the given series (e.g. zero variance).
    #[error("diagnostic undefined: {0}")]
    DegenerateSeries(String),
}

pub type Result<T> = std::result::Result<T, Error>;
