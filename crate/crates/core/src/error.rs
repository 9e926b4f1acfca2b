use thiserror::Error;

/// Errors raised by the tabular CLARE toolkit.
#[derive(Debug, Error)]
pub enum ClareError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("singular linear system while computing {0}")]
    Singular(&'static str),

    #[error("{what} did not converge within {iters} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    #[error("degenerate target: normalizer Z_beta = {0:e}")]
    DegenerateTarget(f64),

    #[error("weight hypothesis violated at pair (s={state}, a={action}): {reason}")]
    HypothesisViolated {
        state: usize,
        action: usize,
        reason: String,
    },

    #[error("no safe pair under threshold u = {0}")]
    NoSafePair(f64),

    #[error("infinite divergence: reference has zero mass at pair index {0} where the other measure is positive")]
    InfiniteDivergence(usize),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ClareError>;
