//! Training configuration, loaded from TOML.
//!
//! ```toml
//! [split]
//! train_fraction = 0.7
//! seed = 42
//!
//! [clustering]
//! k = 60
//!
//! [tradeoff]
//! alpha = 0.5
//! top_p = 4
//!
//! [embedding]
//! provider = "remote_http"
//! endpoint = "https://openrouter.ai/api/v1/embeddings"
//! api_key_env = "EMBEDDING_API_KEY"
//!
//! [[models]]
//! id = "gpt-5-medium"
//! display_name = "GPT-5-medium"
//! input_price = 1.25
//! output_price = 10.0
//! ```
//!
//! Omitted sections take their defaults; omitting `models` selects the default eight-model pool.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::KMeansParams;
use crate::embedding::EmbeddingProviderConfig;
use crate::error::ConfigError;
use crate::pricing::default_models;
use crate::types::{ModelEntry, ModelRegistry, TradeoffConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub k: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub n_init: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let d = KMeansParams::default();
        Self {
            k: d.k,
            max_iters: d.max_iters,
            tol: d.tol,
            seed: 42,
            n_init: d.n_init,
        }
    }
}

impl ClusteringConfig {
    pub fn params(&self) -> KMeansParams {
        KMeansParams {
            k: self.k,
            seed: self.seed,
            max_iters: self.max_iters,
            tol: self.tol,
            n_init: self.n_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub split: SplitConfig,
    pub clustering: ClusteringConfig,
    pub tradeoff: TradeoffConfig,
    pub embedding: EmbeddingProviderConfig,
    pub models: Vec<ModelEntry>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            split: SplitConfig::default(),
            clustering: ClusteringConfig::default(),
            tradeoff: TradeoffConfig::default(),
            embedding: EmbeddingProviderConfig::default(),
            models: default_models(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Uses `seed` for both the split and the k-means initialization.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.split.seed = seed;
        self.clustering.seed = seed;
        self
    }

    pub fn registry(&self) -> Result<ModelRegistry, ConfigError> {
        ModelRegistry::new(self.models.clone())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return invalid(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.split.train_fraction
            ));
        }
        if self.clustering.k == 0 {
            return invalid("clustering.k must be at least 1".into());
        }
        if !(self.clustering.tol >= 0.0) {
            return invalid("clustering.tol must be non-negative".into());
        }
        self.tradeoff
            .validate(Some(self.clustering.k))
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.embedding
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.models.is_empty() {
            return invalid("at least one model is required".into());
        }
        self.registry()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = TrainConfig::from_toml("", Path::new("c.toml")).unwrap();
        assert_eq!(cfg.clustering.k, 60);
        assert_eq!(cfg.tradeoff.top_p, 4);
        assert_eq!(cfg.split.train_fraction, 0.7);
        assert_eq!(cfg.embedding.dim, 4096);
        assert_eq!(cfg.models.len(), 8);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = TrainConfig::default().with_seed(9);
        let back = TrainConfig::from_toml(&cfg.to_toml(), Path::new("c.toml")).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[split]\ntrain_fraction = 1.0",
            "[tradeoff]\nalpha = 1.5\ntop_p = 4",
            "[clustering]\nk = 2\n[tradeoff]\nalpha = 0.5\ntop_p = 3",
            "models = []",
            "[clustering]\nbogus = 1",
        ] {
            assert!(TrainConfig::from_toml(text, Path::new("c.toml")).is_err(), "{text}");
        }
    }
}
