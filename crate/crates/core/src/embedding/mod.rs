//! Query embedding providers.
//!
//! Every provider returns unit-norm vectors of the configured dimension, in
//! input order. Normalization happens here, whatever the provider sends back.

mod hashing;
mod remote;

use serde::{Deserialize, Serialize};

pub use hashing::HashingEmbedder;
pub use remote::RemoteEmbedder;

use crate::error::EmbeddingError;
use crate::types::EmbeddingVector;

/// Default dimension, matching common 8B-parameter embedding models.
pub const DEFAULT_DIM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    RemoteHttp,
    DeterministicTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingProviderConfig {
    pub provider: ProviderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_model_name")]
    pub model_name: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
}

fn default_model_name() -> String {
    "qwen/qwen3-embedding-8b".into()
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_batch() -> usize {
    64
}

impl Default for EmbeddingProviderConfig {
    fn default() -> Self {
        Self::deterministic(DEFAULT_DIM)
    }
}

impl EmbeddingProviderConfig {
    pub fn deterministic(dim: usize) -> Self {
        Self {
            provider: ProviderKind::DeterministicTest,
            endpoint: None,
            model_name: "hashing".into(),
            dim,
            api_key_env: None,
            timeout_ms: default_timeout_ms(),
            max_batch: default_max_batch(),
        }
    }

    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim == 0 {
            return Err(EmbeddingError::Config("dim must be positive".into()));
        }
        if self.timeout_ms == 0 {
            return Err(EmbeddingError::Config("timeout_ms must be positive".into()));
        }
        if self.max_batch == 0 {
            return Err(EmbeddingError::Config("max_batch must be positive".into()));
        }
        if self.provider == ProviderKind::RemoteHttp {
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                return Err(EmbeddingError::Config("remote_http requires an endpoint".into()));
            }
            if self.api_key_env.as_deref().is_none_or(str::is_empty) {
                return Err(EmbeddingError::Config("remote_http requires api_key_env".into()));
            }
        }
        Ok(())
    }

    /// Instantiates the configured provider.
    pub fn build(&self) -> Result<Box<dyn Embedder>, EmbeddingError> {
        self.validate()?;
        Ok(match self.provider {
            ProviderKind::DeterministicTest => Box::new(HashingEmbedder::new(self.dim)),
            ProviderKind::RemoteHttp => Box::new(RemoteEmbedder::new(self.clone())?),
        })
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// Embeds `texts` into unit-norm vectors, one per text, in order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let mut v = self.embed_batch(&[text.to_owned()])?;
        Ok(v.remove(0))
    }
}

/// One-shot convenience: builds the provider described by `cfg` and embeds `texts`.
pub fn embed_batch(
    cfg: &EmbeddingProviderConfig,
    texts: &[String],
) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    cfg.build()?.embed_batch(texts)
}

pub(crate) fn check_inputs(texts: &[String]) -> Result<(), EmbeddingError> {
    if texts.is_empty() {
        return Err(EmbeddingError::InvalidInput("no texts to embed".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(EmbeddingError::InvalidInput(format!("text {i} is empty")));
    }
    Ok(())
}

pub(crate) fn finish(raw: Vec<f64>, dim: usize) -> Result<EmbeddingVector, EmbeddingError> {
    if raw.len() != dim {
        return Err(EmbeddingError::DimensionMismatch {
            expected: dim,
            actual: raw.len(),
        });
    }
    EmbeddingVector::normalized(raw)
        .ok_or_else(|| EmbeddingError::ProviderUnavailable("provider returned a zero vector".into()))
}
