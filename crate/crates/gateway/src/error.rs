use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("gateway config: {0}")]
    Config(String),
    #[error(transparent)]
    Artifact(#[from] arbiter_core::error::ArtifactError),
    #[error(transparent)]
    Embedding(#[from] arbiter_core::error::EmbeddingError),
    #[error("audit log: {0}")]
    Audit(#[from] std::io::Error),
    #[error("http client: {0}")]
    Client(#[from] reqwest::Error),
}
