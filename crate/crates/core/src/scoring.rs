//! Performance-efficiency scoring and model selection.
//!
//! Within cluster `j`, a model's mean score and total cost are min-max normalized
//! across all models, then blended as `alpha * perf + (1 - alpha) * (1 - cost)`.
//! A query's per-model score is the unweighted sum of that blend over the
//! query's nearest clusters; the highest sum wins.

use std::collections::BTreeMap;

use crate::error::ScoringError;
use crate::profile::ProfileMatrix;
use crate::types::{ClusterDistance, ModelId, RoutingDecision, TradeoffConfig};

/// Normalized value assigned to every model when a cluster's extrema coincide.
pub const DEGENERATE_NORMALIZED: f64 = 0.5;

/// Min-max normalizes `values` against the supplied extrema.
pub fn normalize_cluster(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    if hi == lo {
        return vec![DEGENERATE_NORMALIZED; values.len()];
    }
    let span = hi - lo;
    values.iter().map(|v| (v - lo) / span).collect()
}

pub fn cluster_score(perf_norm: f64, cost_norm: f64, alpha: f64) -> f64 {
    alpha * perf_norm + (1.0 - alpha) * (1.0 - cost_norm)
}

/// Result of the argmax over aggregated scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Column index of the chosen model.
    pub chosen: usize,
    /// Aggregated score per model, in `model_order`.
    pub scores: Vec<f64>,
    pub tie_broken: bool,
}

/// Sums each model's cluster scores over `cluster_ids` (in the given order) and
/// picks the maximum. Equal sums fall back to the lower raw cost summed over the
/// same clusters, then to the lexicographically smaller model id.
pub fn select(
    profiles: &ProfileMatrix,
    cluster_ids: &[usize],
    alpha: f64,
) -> Result<Selection, ScoringError> {
    let m = profiles.num_models();
    if m == 0 {
        return Err(ScoringError::EmptyModelSet);
    }
    if cluster_ids.is_empty() {
        return Err(ScoringError::NoClusters);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ScoringError::InvalidConfig(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }

    let mut scores = vec![0.0; m];
    let mut raw_cost = vec![0.0; m];
    for &j in cluster_ids {
        if j >= profiles.k() {
            return Err(ScoringError::ClusterOutOfRange {
                index: j,
                k: profiles.k(),
            });
        }
        let perf = normalize_cluster(&profiles.perf()[j], profiles.perf_min()[j], profiles.perf_max()[j]);
        let cost = normalize_cluster(&profiles.cost()[j], profiles.cost_min()[j], profiles.cost_max()[j]);
        for i in 0..m {
            scores[i] += cluster_score(perf[i], cost[i], alpha);
            raw_cost[i] += profiles.cost()[j][i];
        }
    }

    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ids = profiles.model_order();
    let chosen = (0..m)
        .filter(|&i| scores[i] == best)
        .min_by(|&a, &b| {
            raw_cost[a]
                .total_cmp(&raw_cost[b])
                .then_with(|| ids[a].cmp(&ids[b]))
        })
        .expect("at least one model attains the maximum");
    let tie_broken = scores.iter().filter(|&&s| s == best).count() > 1;

    Ok(Selection {
        chosen,
        scores,
        tie_broken,
    })
}

/// Aggregates over the supplied nearest clusters and builds the full decision.
pub fn aggregate_and_select(
    profiles: &ProfileMatrix,
    nearest: &[ClusterDistance],
    cfg: &TradeoffConfig,
) -> Result<RoutingDecision, ScoringError> {
    cfg.validate(Some(profiles.k()))?;
    let ids: Vec<usize> = nearest.iter().map(|c| c.cluster).collect();
    let sel = select(profiles, &ids, cfg.alpha)?;
    let order = profiles.model_order();
    let scores: BTreeMap<ModelId, f64> = order.iter().cloned().zip(sel.scores).collect();
    Ok(RoutingDecision {
        chosen: order[sel.chosen].clone(),
        scores,
        nearest_clusters: nearest.to_vec(),
        alpha_used: cfg.alpha,
        tie_broken: sel.tie_broken,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<ModelId> {
        (0..n).map(|i| ModelId::new(format!("m{i}")).unwrap()).collect()
    }

    fn hits(ids: &[usize]) -> Vec<ClusterDistance> {
        ids.iter()
            .map(|&cluster| ClusterDistance {
                cluster,
                distance: 0.0,
            })
            .collect()
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_cluster(&[0.2, 0.5, 0.8], 0.2, 0.8);
        assert_eq!((n[0], n[2]), (0.0, 1.0));
        assert!((n[1] - 0.5).abs() < 1e-12);
        assert_eq!(normalize_cluster(&[0.7, 0.7, 0.7], 0.7, 0.7), vec![0.5, 0.5, 0.5]);
        assert_eq!(normalize_cluster(&[0.0, 1.0], 0.0, 1.0), vec![0.0, 1.0]);
    }

    #[test]
    fn cluster_score_examples() {
        assert_eq!(cluster_score(0.9, 0.9, 1.0), 0.9);
        assert!((cluster_score(0.9, 0.9, 0.0) - 0.1).abs() < 1e-15);
        assert!((cluster_score(0.6, 0.2, 0.5) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn alpha_extremes_pick_opposite_models() {
        let p = ProfileMatrix::new(ids(2), vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0]], vec![3])
            .unwrap();
        let d = aggregate_and_select(&p, &hits(&[0]), &TradeoffConfig::new(1.0, 1).unwrap())
            .unwrap();
        assert_eq!(d.chosen.as_str(), "m0");
        assert_eq!(d.scores[&d.chosen], 1.0);
        let d = aggregate_and_select(&p, &hits(&[0]), &TradeoffConfig::new(0.0, 1).unwrap())
            .unwrap();
        assert_eq!(d.chosen.as_str(), "m1");
        assert_eq!(d.scores[&d.chosen], 1.0);
        assert!(!d.tie_broken);
    }

    #[test]
    fn ties_go_to_cheaper_then_smaller_id() {
        // Identical performance, alpha = 1: all scores tie.
        let p = ProfileMatrix::new(
            vec![ModelId::new("b").unwrap(), ModelId::new("a").unwrap(), ModelId::new("c").unwrap()],
            vec![vec![0.5, 0.5, 0.5]],
            vec![vec![1.0, 1.0, 0.5]],
            vec![2],
        )
        .unwrap();
        let d = aggregate_and_select(&p, &hits(&[0]), &TradeoffConfig::new(1.0, 1).unwrap())
            .unwrap();
        assert_eq!(d.chosen.as_str(), "c");
        assert!(d.tie_broken);

        let p = ProfileMatrix::new(
            vec![ModelId::new("b").unwrap(), ModelId::new("a").unwrap()],
            vec![vec![0.5, 0.5]],
            vec![vec![1.0, 1.0]],
            vec![2],
        )
        .unwrap();
        let d = aggregate_and_select(&p, &hits(&[0]), &TradeoffConfig::new(0.3, 1).unwrap())
            .unwrap();
        assert_eq!(d.chosen.as_str(), "a");
        assert!(d.tie_broken);
    }

    #[test]
    fn error_paths() {
        let empty = ProfileMatrix::new(vec![], vec![vec![]], vec![vec![]], vec![1]).unwrap();
        assert_eq!(
            aggregate_and_select(&empty, &hits(&[0]), &TradeoffConfig::new(0.5, 1).unwrap()),
            Err(ScoringError::EmptyModelSet)
        );
        let p = ProfileMatrix::new(ids(1), vec![vec![0.5]], vec![vec![1.0]], vec![1]).unwrap();
        assert_eq!(
            select(&p, &[3], 0.5),
            Err(ScoringError::ClusterOutOfRange { index: 3, k: 1 })
        );
        assert_eq!(select(&p, &[], 0.5), Err(ScoringError::NoClusters));
        assert!(matches!(
            aggregate_and_select(&p, &hits(&[0]), &TradeoffConfig { alpha: 2.0, top_p: 1 }),
            Err(ScoringError::InvalidConfig(_))
        ));
    }
}
