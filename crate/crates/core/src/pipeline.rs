//! End-to-end training: split, embed, cluster, profile, bundle.

use std::collections::HashMap;

use chrono::{DateTime, Utc};
use serde::Serialize;
use tracing::warn;

use crate::artifact::RouterArtifact;
use crate::clustering::fit_kmeans;
use crate::config::TrainConfig;
use crate::embedding::Embedder;
use crate::error::{EmbeddingError, Error, ProfileError};
use crate::profiling::{build_profiles, check_complete, split_records};
use crate::records::EvalRecord;
use crate::types::EmbeddingVector;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub k: usize,
    pub retained_clusters: usize,
    /// Training records per retained cluster, in profile-row order.
    pub cluster_sizes: Vec<usize>,
    pub train_records: usize,
    pub test_records: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub content_digest: String,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub artifact: RouterArtifact,
    pub train: Vec<EvalRecord>,
    pub test: Vec<EvalRecord>,
    pub summary: TrainSummary,
}

/// Embeds `records` in input order, taking vectors from `cache` when present.
pub fn embed_records(
    records: &[EvalRecord],
    embedder: &dyn Embedder,
    cache: Option<&HashMap<String, EmbeddingVector>>,
) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    let mut out: Vec<Option<EmbeddingVector>> = records
        .iter()
        .map(|r| cache.and_then(|c| c.get(&r.query_id)).cloned())
        .collect();
    let missing: Vec<usize> = (0..records.len()).filter(|&i| out[i].is_none()).collect();
    if !missing.is_empty() {
        let texts: Vec<String> = missing.iter().map(|&i| records[i].query_text.clone()).collect();
        for (i, v) in missing.into_iter().zip(embedder.embed_batch(&texts)?) {
            out[i] = Some(v);
        }
    }
    out.into_iter()
        .map(|v| {
            let v = v.expect("every slot filled");
            if v.dim() != embedder.dim() {
                return Err(EmbeddingError::DimensionMismatch {
                    expected: embedder.dim(),
                    actual: v.dim(),
                });
            }
            Ok(v)
        })
        .collect()
}

/// Runs the training pipeline. `cache` supplies precomputed embeddings by query id.
pub fn train(
    records: &[EvalRecord],
    cfg: &TrainConfig,
    embedder: &dyn Embedder,
    cache: Option<&HashMap<String, EmbeddingVector>>,
    created_at: DateTime<Utc>,
) -> Result<TrainOutcome, Error> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(ProfileError::NoRecords.into());
    }
    if embedder.dim() != cfg.embedding.dim {
        return Err(EmbeddingError::DimensionMismatch {
            expected: cfg.embedding.dim,
            actual: embedder.dim(),
        }
        .into());
    }
    let registry = cfg.registry()?;
    check_complete(records, &registry)?;

    let (train, test) = split_records(records, cfg.split.train_fraction, cfg.split.seed);
    let vectors = embed_records(&train, embedder, cache)?;
    let clusters = fit_kmeans(&vectors, &cfg.clustering.params())?;
    let by_id: HashMap<String, EmbeddingVector> = train
        .iter()
        .map(|r| r.query_id.clone())
        .zip(vectors)
        .collect();
    let built = build_profiles(&train, &by_id, &clusters, &registry)?;

    let mut default_cfg = cfg.tradeoff;
    if default_cfg.top_p > built.profiles.k() {
        warn!(
            top_p = default_cfg.top_p,
            retained = built.profiles.k(),
            "fewer retained clusters than top_p; clamping the default"
        );
        default_cfg.top_p = built.profiles.k();
    }

    let summary_sizes = built.profiles.cluster_sizes().to_vec();
    let artifact = RouterArtifact::new(
        clusters,
        built.profiles,
        registry,
        cfg.embedding.clone(),
        default_cfg,
        built.remap,
        created_at,
    )?;
    let summary = TrainSummary {
        k: artifact.cluster_model.k,
        retained_clusters: artifact.profiles.k(),
        cluster_sizes: summary_sizes,
        train_records: train.len(),
        test_records: test.len(),
        iterations: artifact.cluster_model.iterations_run,
        inertia: artifact.cluster_model.inertia,
        content_digest: artifact.content_digest.clone(),
    };
    Ok(TrainOutcome {
        artifact,
        train,
        test,
        summary,
    })
}
