//! Gateway configuration file.
//!
//! ```toml
//! listen = "0.0.0.0:8080"
//! artifact = "router.json"
//! timeout_ms = 120000
//! failover = false
//! audit_log = "audit.jsonl"
//!
//! [upstreams.gpt-5-medium]
//! base_url = "https://openrouter.ai/api/v1"
//! model = "openai/gpt-5"
//! api_key_env = "OPENROUTER_API_KEY"
//! ```
//!
//! Models without an `[upstreams.<id>]` table use the endpoint stored in the artifact's registry.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Duration;

use arbiter_core::{ModelId, ModelRegistry, UpstreamEndpoint};
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub listen: String,
    pub artifact: Option<PathBuf>,
    /// Per-attempt upstream timeout.
    pub timeout_ms: u64,
    /// Fall back to the next-ranked model once the chosen one exhausts its retries.
    pub failover: bool,
    pub retry_attempts: u32,
    /// Delay before the second attempt; doubles for each later attempt.
    pub retry_base_ms: u64,
    /// Audit lines go here (appended); stderr when unset.
    pub audit_log: Option<PathBuf>,
    /// Overrides the artifact's default alpha.
    pub alpha: Option<f64>,
    pub upstreams: BTreeMap<String, UpstreamEndpoint>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            artifact: None,
            timeout_ms: 120_000,
            failover: false,
            retry_attempts: 3,
            retry_base_ms: 250,
            audit_log: None,
            alpha: None,
            upstreams: BTreeMap::new(),
        }
    }
}

/// An upstream with its credential already read from the environment.
#[derive(Debug, Clone)]
pub struct ResolvedUpstream {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
}

impl ResolvedUpstream {
    pub fn chat_completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

impl GatewayConfig {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    /// Sets the port of `listen`, keeping its host.
    pub fn set_port(&mut self, port: u16) {
        let host = self
            .listen
            .rsplit_once(':')
            .map(|(h, _)| h.to_owned())
            .unwrap_or_else(|| self.listen.clone());
        self.listen = format!("{host}:{port}");
    }

    /// One upstream per registry model; fails if any model has no endpoint or
    /// its key variable is unset.
    pub fn resolve_upstreams(
        &self,
        registry: &ModelRegistry,
    ) -> Result<HashMap<ModelId, ResolvedUpstream>, GatewayError> {
        if self.retry_attempts == 0 {
            return Err(GatewayError::Config("retry_attempts must be at least 1".into()));
        }
        if let Some(unknown) = self
            .upstreams
            .keys()
            .find(|id| registry.models().iter().all(|m| m.id.as_str() != id.as_str()))
        {
            return Err(GatewayError::Config(format!(
                "upstream configured for unknown model `{unknown}`"
            )));
        }
        registry
            .models()
            .iter()
            .map(|m| {
                let ep = self
                    .upstreams
                    .get(m.id.as_str())
                    .or(m.upstream.as_ref())
                    .ok_or_else(|| GatewayError::Config(format!("no upstream for model `{}`", m.id)))?;
                let api_key = match &ep.api_key_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        GatewayError::Config(format!(
                            "environment variable `{var}` for model `{}` is not set",
                            m.id
                        ))
                    })?),
                    None => None,
                };
                Ok((
                    m.id.clone(),
                    ResolvedUpstream {
                        base_url: ep.base_url.clone(),
                        model: ep.model.clone(),
                        api_key,
                    },
                ))
            })
            .collect()
    }
}
