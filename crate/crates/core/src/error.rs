use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid prior profile: {0}")]
    InvalidProfile(String),

    #[error("coupling validation failed: {0}")]
    CouplingValidation(String),

    #[error("argument outside of domain: {0}")]
    Domain(String),

    #[error("quadrature did not reach the requested precision: {0}")]
    Precision(String),

    #[error("ill-conditioned linear solve (condition number {0:e})")]
    Conditioning(f64),

    #[error("AMP iterate became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    #[error("inconclusive Monte Carlo check: {0}")]
    Inconclusive(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
