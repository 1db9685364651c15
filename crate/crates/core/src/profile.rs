//! Per-cluster performance and cost profiles of every model.

use serde::{Deserialize, Serialize};

use crate::error::ScoringError;
use crate::types::ModelId;

/// `k × M` matrices of mean score (`perf`) and total USD cost (`cost`), one row per
/// retained cluster and one column per model in `model_order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileMatrixRepr")]
pub struct ProfileMatrix {
    k: usize,
    model_order: Vec<ModelId>,
    perf: Vec<Vec<f64>>,
    cost: Vec<Vec<f64>>,
    perf_min: Vec<f64>,
    perf_max: Vec<f64>,
    cost_min: Vec<f64>,
    cost_max: Vec<f64>,
    cluster_sizes: Vec<usize>,
}

#[derive(Deserialize)]
struct ProfileMatrixRepr {
    k: usize,
    model_order: Vec<ModelId>,
    perf: Vec<Vec<f64>>,
    cost: Vec<Vec<f64>>,
    perf_min: Vec<f64>,
    perf_max: Vec<f64>,
    cost_min: Vec<f64>,
    cost_max: Vec<f64>,
    cluster_sizes: Vec<usize>,
}

impl TryFrom<ProfileMatrixRepr> for ProfileMatrix {
    type Error = ScoringError;

    fn try_from(r: ProfileMatrixRepr) -> Result<Self, Self::Error> {
        let m = ProfileMatrix::new(r.model_order, r.perf, r.cost, r.cluster_sizes)?;
        if m.k != r.k
            || m.perf_min != r.perf_min
            || m.perf_max != r.perf_max
            || m.cost_min != r.cost_min
            || m.cost_max != r.cost_max
        {
            return Err(ScoringError::MalformedProfile(
                "stored extrema disagree with matrix contents".into(),
            ));
        }
        Ok(m)
    }
}

fn extrema(row: &[f64]) -> (f64, f64) {
    row.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

impl ProfileMatrix {
    pub fn new(
        model_order: Vec<ModelId>,
        perf: Vec<Vec<f64>>,
        cost: Vec<Vec<f64>>,
        cluster_sizes: Vec<usize>,
    ) -> Result<Self, ScoringError> {
        let k = perf.len();
        let m = model_order.len();
        if cost.len() != k || cluster_sizes.len() != k {
            return Err(ScoringError::MalformedProfile(format!(
                "row counts differ: perf {k}, cost {}, sizes {}",
                cost.len(),
                cluster_sizes.len()
            )));
        }
        for (j, (p, c)) in perf.iter().zip(&cost).enumerate() {
            if p.len() != m || c.len() != m {
                return Err(ScoringError::MalformedProfile(format!(
                    "row {j} has {} perf and {} cost entries for {m} models",
                    p.len(),
                    c.len()
                )));
            }
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(ScoringError::MalformedProfile(format!(
                    "row {j} has a performance value outside [0, 1]"
                )));
            }
            if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(ScoringError::MalformedProfile(format!(
                    "row {j} has a negative or non-finite cost"
                )));
            }
        }
        if let Some(j) = cluster_sizes.iter().position(|&s| s == 0) {
            return Err(ScoringError::MalformedProfile(format!("cluster {j} is empty")));
        }
        let (perf_min, perf_max) = perf.iter().map(|r| extrema(r)).unzip();
        let (cost_min, cost_max) = cost.iter().map(|r| extrema(r)).unzip();
        Ok(Self {
            k,
            model_order,
            perf,
            cost,
            perf_min,
            perf_max,
            cost_min,
            cost_max,
            cluster_sizes,
        })
    }

    /// Number of retained clusters (rows).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_models(&self) -> usize {
        self.model_order.len()
    }

    pub fn model_order(&self) -> &[ModelId] {
        &self.model_order
    }

    pub fn perf(&self) -> &[Vec<f64>] {
        &self.perf
    }

    pub fn cost(&self) -> &[Vec<f64>] {
        &self.cost
    }

    pub fn perf_min(&self) -> &[f64] {
        &self.perf_min
    }

    pub fn perf_max(&self) -> &[f64] {
        &self.perf_max
    }

    pub fn cost_min(&self) -> &[f64] {
        &self.cost_min
    }

    pub fn cost_max(&self) -> &[f64] {
        &self.cost_max
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    /// Same profiles with columns permuted into `order`.
    pub fn reordered(&self, order: &[ModelId]) -> Result<Self, ScoringError> {
        let idx: Vec<usize> = order
            .iter()
            .map(|id| {
                self.model_order.iter().position(|m| m == id).ok_or_else(|| {
                    ScoringError::MalformedProfile(format!("unknown model `{id}`"))
                })
            })
            .collect::<Result<_, _>>()?;
        if idx.len() != self.model_order.len() {
            return Err(ScoringError::MalformedProfile("reordering must keep every model".into()));
        }
        let pick = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect()
        };
        Self::new(
            order.to_vec(),
            pick(&self.perf),
            pick(&self.cost),
            self.cluster_sizes.clone(),
        )
    }
}
