//! Builds per-cluster model profiles from evaluation records.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clustering::ClusterModel;
use crate::error::ProfileError;
use crate::profile::ProfileMatrix;
use crate::records::EvalRecord;
use crate::types::{EmbeddingVector, ModelRegistry};

/// Seeded random split. The train half receives `round(train_fraction * n)`
/// records; both halves keep the input order.
pub fn split_records(
    records: &[EvalRecord],
    train_fraction: f64,
    seed: u64,
) -> (Vec<EvalRecord>, Vec<EvalRecord>) {
    let n = records.len();
    let n_train = ((train_fraction * n as f64).round() as usize).min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; n];
    for &i in &idx[..n_train] {
        in_train[i] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = records
        .iter()
        .zip(in_train)
        .partition(|(_, is_train)| *is_train);
    (
        train.into_iter().map(|(r, _)| r.clone()).collect(),
        test.into_iter().map(|(r, _)| r.clone()).collect(),
    )
}

/// Profiles plus the mapping from cluster-model indices to profile rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltProfiles {
    pub profiles: ProfileMatrix,
    /// Original cluster index → retained row. Clusters with no training records are absent.
    pub remap: BTreeMap<usize, usize>,
}

/// Checks that every record carries a result for every registry model.
pub fn check_complete(records: &[EvalRecord], registry: &ModelRegistry) -> Result<(), ProfileError> {
    for r in records {
        for m in registry.models() {
            if !r.results.contains_key(&m.id) {
                return Err(ProfileError::IncompleteProfile {
                    query_id: r.query_id.clone(),
                    model: m.id.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Assigns each training record to its nearest centroid and aggregates, per
/// cluster and model, the mean score and the total cost. Unavailable results
/// count as score 0 at cost 0.
pub fn build_profiles(
    train: &[EvalRecord],
    embeddings: &HashMap<String, EmbeddingVector>,
    clusters: &ClusterModel,
    registry: &ModelRegistry,
) -> Result<BuiltProfiles, ProfileError> {
    if train.is_empty() {
        return Err(ProfileError::NoRecords);
    }
    check_complete(train, registry)?;
    let m = registry.len();
    let k = clusters.k;
    let mut score_sum = vec![vec![0.0; m]; k];
    let mut cost_sum = vec![vec![0.0; m]; k];
    let mut sizes = vec![0usize; k];

    for r in train {
        let e = embeddings
            .get(&r.query_id)
            .ok_or_else(|| ProfileError::MissingEmbedding(r.query_id.clone()))?;
        let j = clusters.assign(e)?;
        sizes[j] += 1;
        for (i, model) in registry.models().iter().enumerate() {
            let res = &r.results[&model.id];
            score_sum[j][i] += res.score();
            cost_sum[j][i] += res.cost_usd();
        }
    }

    let mut remap = BTreeMap::new();
    let mut perf = Vec::new();
    let mut cost = Vec::new();
    let mut kept_sizes = Vec::new();
    for j in (0..k).filter(|&j| sizes[j] > 0) {
        remap.insert(j, perf.len());
        let n = sizes[j] as f64;
        perf.push(score_sum[j].iter().map(|s| (s / n).clamp(0.0, 1.0)).collect());
        cost.push(cost_sum[j].clone());
        kept_sizes.push(sizes[j]);
    }
    let profiles = ProfileMatrix::new(registry.ids(), perf, cost, kept_sizes)?;
    Ok(BuiltProfiles { profiles, remap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::ModelResult;
    use crate::types::{ModelEntry, ModelId};

    fn registry(ids: &[&str]) -> ModelRegistry {
        ModelRegistry::new(
            ids.iter()
                .map(|id| ModelEntry {
                    id: ModelId::new(*id).unwrap(),
                    display_name: id.to_string(),
                    input_price: 1.0,
                    output_price: 1.0,
                    upstream: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn record(id: &str, results: &[(&str, f64, f64)]) -> EvalRecord {
        EvalRecord {
            query_id: id.into(),
            query_text: format!("query {id}"),
            benchmark_tag: "b".into(),
            results: results
                .iter()
                .map(|(m, s, c)| {
                    (
                        ModelId::new(*m).unwrap(),
                        ModelResult::Available {
                            score: *s,
                            cost_usd: *c,
                            input_tokens: 0,
                            output_tokens: 0,
                        },
                    )
                })
                .collect(),
        }
    }

    fn one_cluster() -> ClusterModel {
        ClusterModel {
            centroids: vec![vec![1.0, 0.0]],
            k: 1,
            dim: 2,
            seed: 0,
            iterations_run: 0,
            inertia: 0.0,
        }
    }

    fn embs(ids: &[&str]) -> HashMap<String, EmbeddingVector> {
        ids.iter()
            .map(|id| (id.to_string(), EmbeddingVector::new(vec![1.0, 0.0])))
            .collect()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let recs: Vec<_> = (0..10).map(|i| record(&format!("q{i}"), &[("a", 1.0, 0.0)])).collect();
        let (tr, te) = split_records(&recs, 0.7, 3);
        assert_eq!((tr.len(), te.len()), (7, 3));
        let (tr2, _) = split_records(&recs, 0.7, 3);
        assert_eq!(tr, tr2);

        let two = &recs[..2];
        let (a, b) = split_records(two, 0.5, 1);
        assert_eq!((a.len(), b.len()), (1, 1));
        assert_ne!(a[0].query_id, b[0].query_id);
    }

    #[test]
    fn mean_score_and_total_cost() {
        let recs = vec![
            record("q1", &[("A", 1.0, 0.01)]),
            record("q2", &[("A", 0.0, 0.03)]),
        ];
        let built = build_profiles(&recs, &embs(&["q1", "q2"]), &one_cluster(), &registry(&["A"]))
            .unwrap();
        assert_eq!(built.profiles.perf()[0][0], 0.5);
        assert!((built.profiles.cost()[0][0] - 0.04).abs() < 1e-15);
        assert_eq!(built.profiles.cluster_sizes(), &[2]);
    }

    #[test]
    fn identical_models_degenerate() {
        let recs = vec![
            record("q1", &[("A", 1.0, 0.2), ("B", 1.0, 0.2)]),
            record("q2", &[("A", 0.0, 0.1), ("B", 0.0, 0.1)]),
        ];
        let p = build_profiles(&recs, &embs(&["q1", "q2"]), &one_cluster(), &registry(&["A", "B"]))
            .unwrap()
            .profiles;
        assert_eq!(p.perf_min(), p.perf_max());
        assert_eq!(p.cost_min(), p.cost_max());
    }

    #[test]
    fn missing_results_and_embeddings_are_errors() {
        let recs = vec![record("q1", &[("A", 1.0, 0.1)])];
        assert!(matches!(
            build_profiles(&recs, &embs(&["q1"]), &one_cluster(), &registry(&["A", "B"])),
            Err(ProfileError::IncompleteProfile { .. })
        ));
        assert!(matches!(
            build_profiles(&recs, &embs(&[]), &one_cluster(), &registry(&["A"])),
            Err(ProfileError::MissingEmbedding(_))
        ));
    }

    #[test]
    fn empty_clusters_dropped_with_remap() {
        let clusters = ClusterModel {
            centroids: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]],
            k: 3,
            dim: 2,
            seed: 0,
            iterations_run: 0,
            inertia: 0.0,
        };
        let mut e = HashMap::new();
        e.insert("q1".to_string(), EmbeddingVector::new(vec![1.0, 0.0]));
        e.insert("q2".to_string(), EmbeddingVector::new(vec![-1.0, 0.0]));
        let recs = vec![record("q1", &[("A", 1.0, 0.1)]), record("q2", &[("A", 0.0, 0.2)])];
        let built = build_profiles(&recs, &e, &clusters, &registry(&["A"])).unwrap();
        assert_eq!(built.profiles.k(), 2);
        assert_eq!(built.remap, BTreeMap::from([(0, 0), (2, 1)]));
        assert_eq!(built.profiles.perf()[1][0], 0.0);
    }

    #[test]
    fn unavailable_counts_as_zero() {
        let mut r = record("q1", &[("A", 1.0, 0.1)]);
        r.results.insert(ModelId::new("B").unwrap(), ModelResult::Unavailable);
        let p = build_profiles(&[r], &embs(&["q1"]), &one_cluster(), &registry(&["A", "B"]))
            .unwrap()
            .profiles;
        assert_eq!(p.perf()[0], vec![1.0, 0.0]);
        assert_eq!(p.cost()[0], vec![0.1, 0.0]);
    }
}
