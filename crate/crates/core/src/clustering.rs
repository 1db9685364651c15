//! K-means over query embeddings: seeded k-means++ initialization followed by
//! Lloyd iterations, plus nearest-centroid lookup.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ClusterError;
use crate::types::{ClusterDistance, EmbeddingVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Convergence threshold on the largest centroid shift, relative to the
    /// mean norm of the input points.
    pub tol: f64,
    /// Independent k-means++ restarts with seeds `seed, seed + 1, ...`; the
    /// fit with the lowest final inertia is kept (earliest on ties).
    #[serde(default = "one")]
    pub n_init: usize,
}

fn one() -> usize {
    1
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: 60,
            seed: 0,
            max_iters: 300,
            tol: 1e-6,
            n_init: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    pub iterations_run: usize,
    /// Sum of squared distances of the training points to their assigned centroids.
    pub inertia: f64,
}

/// Everything produced while fitting, for callers that need more than the model.
#[derive(Debug, Clone)]
pub struct FitTrace {
    pub model: ClusterModel,
    /// Final assignment of each input point.
    pub labels: Vec<usize>,
    /// Inertia measured after each assignment step, starting with the initial centroids.
    pub inertia_history: Vec<f64>,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(points: &[EmbeddingVector]) -> Result<usize, ClusterError> {
    let dim = points
        .first()
        .map(EmbeddingVector::dim)
        .ok_or_else(|| ClusterError::Invalid("no points to cluster".into()))?;
    if dim == 0 {
        return Err(ClusterError::Invalid("zero-dimensional points".into()));
    }
    for p in points {
        if p.dim() != dim {
            return Err(ClusterError::DimensionMismatch {
                expected: dim,
                actual: p.dim(),
            });
        }
    }
    Ok(dim)
}

/// Seeded k-means++ seeding. Returns the indices of the chosen points, in
/// selection order.
pub fn kmeans_plus_plus(
    points: &[EmbeddingVector],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>, ClusterError> {
    check_dims(points)?;
    if k == 0 {
        return Err(ClusterError::Invalid("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(ClusterError::TooFewPoints {
            k,
            points: points.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..points.len());
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p.values(), points[first].values()))
        .collect();

    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // Every point coincides with a chosen seed.
            (0..points.len())
                .find(|i| !chosen.contains(i))
                .expect("k <= n leaves an unchosen point")
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p.values(), points[next].values()));
        }
    }
    Ok(chosen)
}

fn assign(points: &[EmbeddingVector], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    points
        .par_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.iter().enumerate() {
                let d = sq_dist(p.values(), c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .unzip()
}

/// Fits k-means and returns the model only.
pub fn fit_kmeans(
    points: &[EmbeddingVector],
    params: &KMeansParams,
) -> Result<ClusterModel, ClusterError> {
    fit_kmeans_traced(points, params).map(|t| t.model)
}

/// Fits k-means, keeping the final labels and the per-iteration inertia of
/// the retained restart.
///
/// Each iteration assigns points to the nearest centroid (ties to the lower
/// index), moves every centroid to the mean of its points, and reseeds any
/// empty centroid at the point farthest from its assigned centroid. Fitting
/// stops once no centroid moves more than `tol` times the mean point norm, or
/// after `max_iters` iterations.
pub fn fit_kmeans_traced(
    points: &[EmbeddingVector],
    params: &KMeansParams,
) -> Result<FitTrace, ClusterError> {
    let dim = check_dims(points)?;
    if params.k > points.len() {
        return Err(ClusterError::TooFewPoints {
            k: params.k,
            points: points.len(),
        });
    }
    if !(params.tol >= 0.0) {
        return Err(ClusterError::Invalid("tol must be non-negative".into()));
    }
    if params.n_init == 0 {
        return Err(ClusterError::Invalid("n_init must be at least 1".into()));
    }
    let mut best = fit_once(points, params, params.seed, dim)?;
    for r in 1..params.n_init {
        let t = fit_once(points, params, params.seed.wrapping_add(r as u64), dim)?;
        if t.model.inertia < best.model.inertia {
            best = t;
        }
    }
    best.model.seed = params.seed;
    Ok(best)
}

fn fit_once(
    points: &[EmbeddingVector],
    params: &KMeansParams,
    seed: u64,
    dim: usize,
) -> Result<FitTrace, ClusterError> {
    let k = params.k;
    let seeds = kmeans_plus_plus(points, k, seed)?;
    let mut centroids: Vec<Vec<f64>> = seeds.iter().map(|&i| points[i].values().to_vec()).collect();

    let scale = points.iter().map(EmbeddingVector::norm).sum::<f64>() / points.len() as f64;
    let threshold = params.tol * scale;

    let (mut labels, mut dists) = assign(points, &centroids);
    let mut history = vec![dists.iter().sum::<f64>()];
    let mut iterations = 0;

    while iterations < params.max_iters {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p.values()) {
                *s += v;
            }
        }
        let mut next = sums;
        for (c, &n) in next.iter_mut().zip(&counts) {
            if n > 0 {
                c.iter_mut().for_each(|v| *v /= n as f64);
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let far = dists
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best })
                .0;
            next[j] = points[far].values().to_vec();
            dists[far] = 0.0;
        }

        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        iterations += 1;

        let (l, d) = assign(points, &centroids);
        labels = l;
        dists = d;
        let inertia = dists.iter().sum::<f64>();
        debug_assert!(
            inertia <= history.last().unwrap() * (1.0 + 1e-9) + 1e-12,
            "inertia increased from {} to {inertia}",
            history.last().unwrap()
        );
        history.push(inertia);

        if shift <= threshold {
            break;
        }
    }

    let inertia = *history.last().unwrap();
    Ok(FitTrace {
        model: ClusterModel {
            centroids,
            k,
            dim,
            seed: params.seed,
            iterations_run: iterations,
            inertia,
        },
        labels,
        inertia_history: history,
    })
}

impl ClusterModel {
    /// Index of the single nearest centroid.
    pub fn assign(&self, e: &EmbeddingVector) -> Result<usize, ClusterError> {
        Ok(nearest_clusters(self, e, 1)?[0].cluster)
    }

    /// Like [`nearest_clusters`], restricted to the centroids accepted by `keep`.
    pub fn nearest_where(
        &self,
        e: &EmbeddingVector,
        p: usize,
        keep: impl Fn(usize) -> bool,
    ) -> Result<Vec<ClusterDistance>, ClusterError> {
        if e.dim() != self.dim {
            return Err(ClusterError::DimensionMismatch {
                expected: self.dim,
                actual: e.dim(),
            });
        }
        let mut all: Vec<ClusterDistance> = self
            .centroids
            .iter()
            .enumerate()
            .filter(|(j, _)| keep(*j))
            .map(|(cluster, c)| ClusterDistance {
                cluster,
                distance: sq_dist(e.values(), c).sqrt(),
            })
            .collect();
        if p == 0 || p > all.len() {
            return Err(ClusterError::Invalid(format!(
                "requested {p} nearest clusters out of {}",
                all.len()
            )));
        }
        all.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.cluster.cmp(&b.cluster)));
        all.truncate(p);
        Ok(all)
    }
}

/// The `p` centroids closest to `e` in Euclidean distance, ascending, ties to the lower index.
pub fn nearest_clusters(
    model: &ClusterModel,
    e: &EmbeddingVector,
    p: usize,
) -> Result<Vec<ClusterDistance>, ClusterError> {
    model.nearest_where(e, p, |_| true)
}
