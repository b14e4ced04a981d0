use occsim_core::error::ConfigError;
use occsim_net::NetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("update aborted: {0}")]
    NonFinite(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ConfigError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
