use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{check_inputs, finish, Embedder, EmbeddingProviderConfig};
use crate::error::EmbeddingError;
use crate::types::EmbeddingVector;

const MAX_ATTEMPTS: u32 = 3;
const BACKOFF_BASE: Duration = Duration::from_millis(100);

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

/// Client for an embeddings endpoint speaking the `{model, input}` / `{data: [{embedding}]}` protocol.
///
/// Must not be called from inside an async runtime; wrap calls in a blocking task.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    cfg: EmbeddingProviderConfig,
    client: Client,
}

enum Attempt {
    Retry(String),
    Fatal(EmbeddingError),
}

impl RemoteEmbedder {
    pub fn new(cfg: EmbeddingProviderConfig) -> Result<Self, EmbeddingError> {
        cfg.validate()?;
        let client = Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| EmbeddingError::Config(e.to_string()))?;
        Ok(Self { cfg, client })
    }

    fn api_key(&self) -> Result<String, EmbeddingError> {
        let var = self.cfg.api_key_env.as_deref().unwrap_or_default();
        std::env::var(var)
            .map_err(|_| EmbeddingError::AuthError(format!("environment variable `{var}` is not set")))
    }

    fn request_once(&self, key: &str, batch: &[String]) -> Result<Vec<Vec<f64>>, Attempt> {
        let endpoint = self.cfg.endpoint.as_deref().unwrap_or_default();
        let resp = self
            .client
            .post(endpoint)
            .bearer_auth(key)
            .json(&EmbeddingRequest {
                model: &self.cfg.model_name,
                input: batch,
            })
            .send()
            .map_err(|e| Attempt::Retry(e.to_string()))?;

        let status = resp.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(Attempt::Fatal(EmbeddingError::AuthError(format!("HTTP {status}"))));
        }
        if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(EmbeddingError::ProviderUnavailable(format!(
                "HTTP {status}"
            ))));
        }
        let body: EmbeddingResponse = resp
            .json()
            .map_err(|e| Attempt::Fatal(EmbeddingError::ProviderUnavailable(format!("bad response body: {e}"))))?;
        if body.data.len() != batch.len() {
            return Err(Attempt::Fatal(EmbeddingError::ProviderUnavailable(format!(
                "expected {} embeddings, got {}",
                batch.len(),
                body.data.len()
            ))));
        }
        let mut items = body.data;
        if items.iter().all(|i| i.index.is_some()) {
            items.sort_by_key(|i| i.index);
        }
        Ok(items.into_iter().map(|i| i.embedding).collect())
    }

    fn embed_chunk(&self, key: &str, batch: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let mut last = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            if attempt > 0 {
                thread::sleep(BACKOFF_BASE * 2u32.pow(attempt - 1));
            }
            match self.request_once(key, batch) {
                Ok(v) => return Ok(v),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => {
                    warn!(attempt = attempt + 1, error = %msg, "embedding request failed");
                    last = msg;
                }
            }
        }
        Err(EmbeddingError::ProviderUnavailable(format!(
            "{MAX_ATTEMPTS} attempts failed, last error: {last}"
        )))
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        check_inputs(texts)?;
        let key = self.api_key()?;
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.cfg.max_batch) {
            for raw in self.embed_chunk(&key, chunk)? {
                out.push(finish(raw, self.cfg.dim)?);
            }
        }
        Ok(out)
    }
}
