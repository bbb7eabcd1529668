use thiserror::Error;

#[derive(Debug, Error)]
pub enum NtpError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("cannot place objects: {0}")]
    UnsatisfiableLayout(String),
    #[error("invalid API argument: {0}")]
    ApiArgument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported registry version {found} (expected {expected})")]
    RegistryVersion { found: u32, expected: u32 },
    #[error("empty specification")]
    EmptySpec,
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NtpError>;
