use crate::evidence::EvidenceChain;

/// Transport failure categories for remote backends.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("request timed out")]
    Timeout,
    #[error("non-success status {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl TransportError {
    /// Transient failures are worth retrying; client errors are not.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Connect(_) | TransportError::Timeout => true,
            TransportError::Status(code) => *code >= 500,
            TransportError::Malformed(_) => false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("registration error: {0}")]
    Registration(String),

    #[error("dispatch error: {0}")]
    Dispatch(String),

    #[error("synthesis error: {0}")]
    Synthesis(String),

    #[error("planner error: {0}")]
    Planner(String),

    #[error("orchestration error: {message}")]
    Orchestration {
        message: String,
        partial: EvidenceChain,
    },

    #[error(transparent)]
    Transport(#[from] TransportError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
