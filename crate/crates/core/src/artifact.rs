//! The persisted router: cluster model, profiles, registry and defaults.
//!
//! Stored as pretty-printed JSON with full-precision floats. `content_digest`
//! is the SHA-256 of the canonical JSON of every field except the digest and
//! the creation timestamp, and is checked on load.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::ClusterModel;
use crate::embedding::EmbeddingProviderConfig;
use crate::error::ArtifactError;
use crate::profile::ProfileMatrix;
use crate::types::{ModelRegistry, TradeoffConfig};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterArtifact {
    pub version: String,
    pub cluster_model: ClusterModel,
    pub profiles: ProfileMatrix,
    pub registry: ModelRegistry,
    pub embedding_cfg: EmbeddingProviderConfig,
    pub default_cfg: TradeoffConfig,
    /// Cluster-model index → profile row, for clusters that kept training records.
    pub cluster_index_remap: BTreeMap<usize, usize>,
    pub created_at: DateTime<Utc>,
    pub content_digest: String,
}

#[derive(Serialize)]
struct DigestView<'a> {
    version: &'a str,
    cluster_model: &'a ClusterModel,
    profiles: &'a ProfileMatrix,
    registry: &'a ModelRegistry,
    embedding_cfg: &'a EmbeddingProviderConfig,
    default_cfg: &'a TradeoffConfig,
    cluster_index_remap: &'a BTreeMap<usize, usize>,
}

impl RouterArtifact {
    pub fn new(
        cluster_model: ClusterModel,
        profiles: ProfileMatrix,
        registry: ModelRegistry,
        embedding_cfg: EmbeddingProviderConfig,
        default_cfg: TradeoffConfig,
        cluster_index_remap: BTreeMap<usize, usize>,
        created_at: DateTime<Utc>,
    ) -> Result<Self, ArtifactError> {
        let mut a = Self {
            version: FORMAT_VERSION.into(),
            cluster_model,
            profiles,
            registry,
            embedding_cfg,
            default_cfg,
            cluster_index_remap,
            created_at,
            content_digest: String::new(),
        };
        a.validate()?;
        a.content_digest = a.compute_digest();
        Ok(a)
    }

    pub fn compute_digest(&self) -> String {
        let view = DigestView {
            version: &self.version,
            cluster_model: &self.cluster_model,
            profiles: &self.profiles,
            registry: &self.registry,
            embedding_cfg: &self.embedding_cfg,
            default_cfg: &self.default_cfg,
            cluster_index_remap: &self.cluster_index_remap,
        };
        let bytes = serde_json::to_vec(&view).expect("artifact fields serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Structural invariants between the bundled parts.
    pub fn validate(&self) -> Result<(), ArtifactError> {
        let bad = |m: String| Err(ArtifactError::MalformedArtifact(m));
        if self.profiles.model_order() != self.registry.ids().as_slice() {
            return bad("profile model order differs from registry order".into());
        }
        let cm = &self.cluster_model;
        if cm.k != cm.centroids.len() || cm.centroids.iter().any(|c| c.len() != cm.dim) {
            return bad("cluster model shape is inconsistent".into());
        }
        if cm.centroids.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite centroid entry".into());
        }
        if cm.dim != self.embedding_cfg.dim {
            return bad(format!(
                "cluster dim {} differs from embedding dim {}",
                cm.dim, self.embedding_cfg.dim
            ));
        }
        let rows = self.profiles.k();
        if self.cluster_index_remap.len() != rows || rows > cm.k {
            return bad(format!(
                "{} remapped clusters for {rows} profile rows and k = {}",
                self.cluster_index_remap.len(),
                cm.k
            ));
        }
        let mut targets: Vec<usize> = self.cluster_index_remap.values().copied().collect();
        targets.sort_unstable();
        if self.cluster_index_remap.keys().any(|&j| j >= cm.k) || targets != (0..rows).collect::<Vec<_>>() {
            return bad("cluster index remap is not a bijection onto profile rows".into());
        }
        self.default_cfg
            .validate(Some(rows))
            .map_err(|e| ArtifactError::MalformedArtifact(e.to_string()))?;
        self.embedding_cfg
            .validate()
            .map_err(|e| ArtifactError::MalformedArtifact(e.to_string()))?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("artifact serializes")
    }

    pub fn from_bytes(bytes: &[u8], expected_version: &str) -> Result<Self, ArtifactError> {
        let value: serde_json::Value = serde_json::from_slice(bytes)
            .map_err(|e| ArtifactError::MalformedArtifact(e.to_string()))?;
        let found = value
            .get("version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| ArtifactError::MalformedArtifact("missing `version`".into()))?;
        if found != expected_version {
            return Err(ArtifactError::VersionMismatch {
                found: found.into(),
                expected: expected_version.into(),
            });
        }
        let artifact: Self = serde_json::from_value(value)
            .map_err(|e| ArtifactError::MalformedArtifact(e.to_string()))?;
        let computed = artifact.compute_digest();
        if computed != artifact.content_digest {
            return Err(ArtifactError::DigestMismatch {
                recorded: artifact.content_digest,
                computed,
            });
        }
        artifact.validate()?;
        Ok(artifact)
    }
}

pub fn save_artifact(artifact: &RouterArtifact, path: &Path) -> Result<(), ArtifactError> {
    fs::write(path, artifact.to_bytes()).map_err(|source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_artifact(path: &Path) -> Result<RouterArtifact, ArtifactError> {
    load_artifact_expecting(path, FORMAT_VERSION)
}

pub fn load_artifact_expecting(path: &Path, version: &str) -> Result<RouterArtifact, ArtifactError> {
    let bytes = fs::read(path).map_err(|source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    RouterArtifact::from_bytes(&bytes, version)
}
