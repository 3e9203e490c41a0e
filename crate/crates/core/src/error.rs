use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("graph condition violated: radius {value:.3e} at node {node}")]
    GraphCondition { node: usize, value: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("tail fit failed: {0}")]
    TailFit(String),

    #[error("admissibility lost at tau = {tau}: {reason}")]
    Admissibility { tau: f64, reason: String },

    #[error("iteration diverged at delta = {delta}: {reason}")]
    Divergence { delta: f64, reason: String },

    #[error("sampling budget exhausted after {attempts} attempts")]
    Sampling { attempts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
