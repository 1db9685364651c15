//! Routes each query to exactly one model from a pool by trading off
//! expected accuracy against cost, using per-cluster profiles learned from
//! recorded evaluation results.
//!
//! Training: embed queries, cluster them with k-means, and record each model's
//! mean score and total cost per cluster. Routing: embed the incoming query,
//! take its `top_p` nearest clusters, sum each model's normalized
//! performance/cost score over them, and pick the best.

pub mod artifact;
pub mod clustering;
pub mod config;
pub mod embedding;
pub mod error;
pub mod fixture;
pub mod pareto;
pub mod pipeline;
pub mod pricing;
pub mod profile;
pub mod profiling;
pub mod records;
pub mod replay;
pub mod router;
pub mod scoring;
pub mod types;

pub use artifact::{load_artifact, save_artifact, RouterArtifact};
pub use clustering::{fit_kmeans, nearest_clusters, ClusterModel, KMeansParams};
pub use config::TrainConfig;
pub use embedding::{Embedder, EmbeddingProviderConfig, ProviderKind};
pub use error::Error;
pub use profile::ProfileMatrix;
pub use records::{EvalRecord, ModelResult};
pub use router::Router;
pub use scoring::{aggregate_and_select, cluster_score, normalize_cluster};
pub use types::{
    ClusterDistance, EmbeddingVector, ModelEntry, ModelId, ModelRegistry, RoutingDecision,
    TradeoffConfig, UpstreamEndpoint,
};
