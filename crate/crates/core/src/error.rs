use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// Gram matrix not positive definite or too badly conditioned to trust:
    /// the operator is not injective on the requested subspace.
    #[error("operator not injective on V_{j}: {detail}")]
    Singular { j: usize, detail: String },

    /// A candidate image has mass beyond the observed coordinates.
    #[error("truncation loss: image extends to coordinate {needed} but only {observed} are observed")]
    TruncationLoss { needed: usize, observed: usize },

    #[error("prior support violation: {0}")]
    SupportViolation(String),

    #[error("theorem hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("tau grid too narrow: {mass:.3e} posterior mass at the {side} endpoint")]
    GridTooNarrow { side: &'static str, mass: f64 },

    #[error("sampler misconfigured: acceptance rate {rate:.4} below {floor}")]
    LowAcceptance { rate: f64, floor: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
