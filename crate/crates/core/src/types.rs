//! Domain types shared by every stage of the routing pipeline.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ScoringError};

/// Identifier of one model in the pool.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModelId(String);

impl ModelId {
    pub fn new(id: impl Into<String>) -> Result<Self, ConfigError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(ConfigError::Invalid("model id must be non-empty".into()));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ModelId {
    type Error = ConfigError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<ModelId> for String {
    fn from(id: ModelId) -> Self {
        id.0
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Where the gateway sends requests for a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpstreamEndpoint {
    /// Base URL of an OpenAI-compatible API, e.g. `https://openrouter.ai/api/v1`.
    pub base_url: String,
    /// Model name sent in the upstream request body.
    pub model: String,
    /// Environment variable holding the bearer token, if the upstream needs one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub id: ModelId,
    pub display_name: String,
    /// USD per 1M input tokens.
    pub input_price: f64,
    /// USD per 1M output tokens.
    pub output_price: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upstream: Option<UpstreamEndpoint>,
}

/// Ordered set of models. The order defines matrix column order everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ModelEntry>", into = "Vec<ModelEntry>")]
pub struct ModelRegistry {
    models: Vec<ModelEntry>,
}

impl ModelRegistry {
    pub fn new(models: Vec<ModelEntry>) -> Result<Self, ConfigError> {
        let mut seen = HashSet::new();
        for m in &models {
            if !seen.insert(m.id.clone()) {
                return Err(ConfigError::Invalid(format!("duplicate model id `{}`", m.id)));
            }
            if !(m.input_price >= 0.0 && m.input_price.is_finite())
                || !(m.output_price >= 0.0 && m.output_price.is_finite())
            {
                return Err(ConfigError::Invalid(format!(
                    "model `{}` has a negative or non-finite price",
                    m.id
                )));
            }
        }
        Ok(Self { models })
    }

    pub fn models(&self) -> &[ModelEntry] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn ids(&self) -> Vec<ModelId> {
        self.models.iter().map(|m| m.id.clone()).collect()
    }

    pub fn get(&self, id: &ModelId) -> Option<&ModelEntry> {
        self.models.iter().find(|m| &m.id == id)
    }

    pub fn position(&self, id: &ModelId) -> Option<usize> {
        self.models.iter().position(|m| &m.id == id)
    }

    /// Registry restricted to `ids`, keeping this registry's order.
    pub fn subset(&self, ids: &[ModelId]) -> Result<Self, ConfigError> {
        for id in ids {
            if self.get(id).is_none() {
                return Err(ConfigError::Invalid(format!("unknown model `{id}`")));
            }
        }
        Self::new(
            self.models
                .iter()
                .filter(|m| ids.contains(&m.id))
                .cloned()
                .collect(),
        )
    }
}

impl TryFrom<Vec<ModelEntry>> for ModelRegistry {
    type Error = ConfigError;

    fn try_from(value: Vec<ModelEntry>) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<ModelRegistry> for Vec<ModelEntry> {
    fn from(r: ModelRegistry) -> Self {
        r.models
    }
}

/// A query embedding. Vectors produced by the embedding module are unit-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// Scales `values` to unit L2 norm. Returns `None` for a zero or non-finite vector.
    pub fn normalized(mut values: Vec<f64>) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return None;
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Some(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// The trade-off weight between performance and cost, plus how many clusters to consult.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeoffConfig {
    pub alpha: f64,
    pub top_p: usize,
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            top_p: 4,
        }
    }
}

impl TradeoffConfig {
    pub fn new(alpha: f64, top_p: usize) -> Result<Self, ScoringError> {
        let cfg = Self { alpha, top_p };
        cfg.validate(None)?;
        Ok(cfg)
    }

    /// Checks `0 <= alpha <= 1` and `1 <= top_p <= k` (when `k` is known).
    pub fn validate(&self, k: Option<usize>) -> Result<(), ScoringError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ScoringError::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.top_p == 0 {
            return Err(ScoringError::InvalidConfig("top_p must be at least 1".into()));
        }
        if let Some(k) = k {
            if self.top_p > k {
                return Err(ScoringError::InvalidConfig(format!(
                    "top_p = {} exceeds the {} available clusters",
                    self.top_p, k
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterDistance {
    pub cluster: usize,
    pub distance: f64,
}

/// Outcome of routing one query, with enough detail to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub chosen: ModelId,
    pub scores: BTreeMap<ModelId, f64>,
    pub nearest_clusters: Vec<ClusterDistance>,
    pub alpha_used: f64,
    pub tie_broken: bool,
}

impl RoutingDecision {
    /// The chosen model first, then the others by descending score (ties by id).
    pub fn ranked(&self) -> Vec<ModelId> {
        let mut ids: Vec<_> = self.scores.iter().collect();
        ids.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
        let mut out: Vec<ModelId> = vec![self.chosen.clone()];
        out.extend(ids.into_iter().map(|(id, _)| id.clone()).filter(|id| id != &self.chosen));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, input: f64) -> ModelEntry {
        ModelEntry {
            id: ModelId::new(id).unwrap(),
            display_name: id.into(),
            input_price: input,
            output_price: 1.0,
            upstream: None,
        }
    }

    #[test]
    fn empty_model_id_rejected() {
        assert!(ModelId::new("  ").is_err());
        assert!(serde_json::from_str::<ModelId>("\"\"").is_err());
    }

    #[test]
    fn registry_rejects_duplicates_and_negative_prices() {
        assert!(ModelRegistry::new(vec![entry("a", 1.0), entry("a", 2.0)]).is_err());
        assert!(ModelRegistry::new(vec![entry("a", -1.0)]).is_err());
        let reg = ModelRegistry::new(vec![entry("b", 1.0), entry("a", 2.0)]).unwrap();
        assert_eq!(reg.position(&ModelId::new("a").unwrap()), Some(1));
    }

    #[test]
    fn tradeoff_bounds() {
        assert!(TradeoffConfig::new(1.5, 1).is_err());
        assert!(TradeoffConfig::new(-0.1, 1).is_err());
        assert!(TradeoffConfig::new(0.5, 0).is_err());
        let cfg = TradeoffConfig::new(0.0, 5).unwrap();
        assert!(cfg.validate(Some(4)).is_err());
        assert!(cfg.validate(Some(5)).is_ok());
    }

    #[test]
    fn normalized_rejects_zero() {
        assert!(EmbeddingVector::normalized(vec![0.0; 4]).is_none());
        let v = EmbeddingVector::normalized(vec![3.0, 4.0]).unwrap();
        assert_eq!(v.values(), &[0.6, 0.8]);
    }
}
