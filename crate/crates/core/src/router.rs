//! Inference-time routing: embed, find the nearest retained clusters, score, select.

use crate::artifact::RouterArtifact;
use crate::embedding::Embedder;
use crate::error::{EmbeddingError, RouteError};
use crate::scoring::aggregate_and_select;
use crate::types::{ClusterDistance, EmbeddingVector, RoutingDecision, TradeoffConfig};

/// A loaded artifact bound to its embedding provider. Immutable; share behind an `Arc`.
pub struct Router {
    artifact: RouterArtifact,
    embedder: Box<dyn Embedder>,
}

impl std::fmt::Debug for Router {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Router")
            .field("digest", &self.artifact.content_digest)
            .finish_non_exhaustive()
    }
}

impl Router {
    /// Builds the embedding provider named in the artifact.
    pub fn new(artifact: RouterArtifact) -> Result<Self, EmbeddingError> {
        let embedder = artifact.embedding_cfg.build()?;
        Self::with_embedder(artifact, embedder)
    }

    pub fn with_embedder(
        artifact: RouterArtifact,
        embedder: Box<dyn Embedder>,
    ) -> Result<Self, EmbeddingError> {
        if embedder.dim() != artifact.cluster_model.dim {
            return Err(EmbeddingError::DimensionMismatch {
                expected: artifact.cluster_model.dim,
                actual: embedder.dim(),
            });
        }
        Ok(Self { artifact, embedder })
    }

    pub fn artifact(&self) -> &RouterArtifact {
        &self.artifact
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    /// The artifact defaults, or `cfg_override` after validation.
    pub fn effective_cfg(&self, cfg_override: Option<TradeoffConfig>) -> Result<TradeoffConfig, RouteError> {
        let cfg = cfg_override.unwrap_or(self.artifact.default_cfg);
        cfg.validate(Some(self.artifact.profiles.k()))?;
        Ok(cfg)
    }

    pub fn route(
        &self,
        query_text: &str,
        cfg_override: Option<TradeoffConfig>,
    ) -> Result<RoutingDecision, RouteError> {
        if query_text.trim().is_empty() {
            return Err(RouteError::EmptyQuery);
        }
        let cfg = self.effective_cfg(cfg_override)?;
        let e = self.embedder.embed_one(query_text)?;
        self.route_embedding(&e, &cfg)
    }

    /// Routes an already-embedded query. `nearest_clusters` in the decision
    /// carries cluster-model indices.
    pub fn route_embedding(
        &self,
        e: &EmbeddingVector,
        cfg: &TradeoffConfig,
    ) -> Result<RoutingDecision, RouteError> {
        let a = &self.artifact;
        cfg.validate(Some(a.profiles.k()))?;
        let remap = &a.cluster_index_remap;
        let nearest = a
            .cluster_model
            .nearest_where(e, cfg.top_p, |j| remap.contains_key(&j))?;
        let rows: Vec<ClusterDistance> = nearest
            .iter()
            .map(|c| ClusterDistance {
                cluster: remap[&c.cluster],
                distance: c.distance,
            })
            .collect();
        let mut decision = aggregate_and_select(&a.profiles, &rows, cfg)?;
        decision.nearest_clusters = nearest;
        Ok(decision)
    }
}

/// One-off routing against an artifact; builds the provider on each call.
pub fn route(
    artifact: &RouterArtifact,
    query_text: &str,
    cfg_override: Option<TradeoffConfig>,
) -> Result<RoutingDecision, RouteError> {
    Router::new(artifact.clone())?.route(query_text, cfg_override)
}
