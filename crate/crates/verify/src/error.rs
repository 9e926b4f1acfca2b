use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("a check needs at least one instance")]
    NoInstances,

    #[error(transparent)]
    Core(#[from] clare_core::ClareError),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, VerifyError>;
