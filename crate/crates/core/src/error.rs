//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by model construction, integration and analysis routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A model or grid parameter violates its domain constraint.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A history, age profile or PDE state violates its invariants.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A quantity was requested outside the domain where it is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An integrator produced a non-finite or inadmissibly negative value.
    #[error("integration failure: {0}")]
    Integration(String),

    /// A bracketed search or Newton iteration failed to converge.
    #[error("root finding failure: {0}")]
    RootFinding(String),

    /// Winding-number count and refined roots disagree after retries.
    #[error("spectral analysis failure: {0}")]
    Spectral(String),

    /// Evaluation outside the stored time or age range.
    #[error("out of range: {0}")]
    OutOfRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;
