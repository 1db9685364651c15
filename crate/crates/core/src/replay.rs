//! Offline counterfactual replay over recorded evaluation results.
//!
//! Each test query is routed, then charged the recorded score and cost of the
//! model the router picked. No model is called.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ReplayError;
use crate::pareto::pareto_indices;
use crate::pipeline::embed_records;
use crate::records::EvalRecord;
use crate::router::Router;
use crate::types::{EmbeddingVector, ModelId, ModelRegistry, RoutingDecision, TradeoffConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingReport {
    pub alpha: f64,
    pub top_p: usize,
    pub n_queries: usize,
    /// Unweighted mean of the per-benchmark accuracies.
    pub avg_accuracy: f64,
    pub total_cost: f64,
    pub per_benchmark_accuracy: BTreeMap<String, f64>,
    pub usage_proportion: BTreeMap<ModelId, f64>,
    pub usage_counts: BTreeMap<ModelId, usize>,
    /// Per benchmark, how many queries went to a model recorded as unavailable.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub unavailable_hits: BTreeMap<String, usize>,
}

/// A single model answering every test query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBaseline {
    pub model: ModelId,
    pub display_name: String,
    /// Mean over every benchmark, unavailable results scoring 0.
    pub avg_accuracy: f64,
    /// Mean over only the benchmarks where the model has at least one available result.
    pub avg_accuracy_available: f64,
    pub total_cost: f64,
    /// `None` where the model has no available result on that benchmark.
    pub per_benchmark_accuracy: BTreeMap<String, Option<f64>>,
}

#[derive(Default)]
struct BenchAcc {
    score: f64,
    n: usize,
}

fn mean_over_benchmarks(per: &BTreeMap<String, f64>) -> f64 {
    if per.is_empty() {
        0.0
    } else {
        per.values().sum::<f64>() / per.len() as f64
    }
}

/// Embeddings for `records`, from `cache` where present and the router's provider otherwise.
pub fn embed_for_replay(
    router: &Router,
    records: &[EvalRecord],
    cache: Option<&HashMap<String, EmbeddingVector>>,
) -> Result<Vec<EmbeddingVector>, ReplayError> {
    Ok(embed_records(records, router.embedder(), cache)?)
}

/// Routes every record; decisions come back in record order.
pub fn route_all(
    router: &Router,
    embeddings: &[EmbeddingVector],
    cfg: &TradeoffConfig,
) -> Result<Vec<RoutingDecision>, ReplayError> {
    embeddings
        .par_iter()
        .map(|e| router.route_embedding(e, cfg).map_err(ReplayError::from))
        .collect()
}

/// Charges each record the recorded outcome of its routed model.
pub fn score_decisions(
    records: &[EvalRecord],
    decisions: &[RoutingDecision],
    registry: &ModelRegistry,
    cfg: &TradeoffConfig,
) -> Result<RoutingReport, ReplayError> {
    if records.is_empty() {
        return Err(ReplayError::NoRecords);
    }
    let mut bench: BTreeMap<String, BenchAcc> = BTreeMap::new();
    let mut counts: BTreeMap<ModelId, usize> = registry.ids().into_iter().map(|id| (id, 0)).collect();
    let mut unavailable_hits = BTreeMap::new();
    let mut total_cost = 0.0;

    for (r, d) in records.iter().zip(decisions) {
        let res = r.result(&d.chosen).ok_or_else(|| ReplayError::IncompleteProfile {
            query_id: r.query_id.clone(),
            model: d.chosen.to_string(),
        })?;
        let b = bench.entry(r.benchmark_tag.clone()).or_default();
        b.score += res.score();
        b.n += 1;
        total_cost += res.cost_usd();
        *counts.entry(d.chosen.clone()).or_default() += 1;
        if !res.is_available() {
            *unavailable_hits.entry(r.benchmark_tag.clone()).or_default() += 1;
        }
    }

    let per_benchmark_accuracy: BTreeMap<String, f64> = bench
        .into_iter()
        .map(|(k, b)| (k, b.score / b.n as f64))
        .collect();
    let n = records.len();
    Ok(RoutingReport {
        alpha: cfg.alpha,
        top_p: cfg.top_p,
        n_queries: n,
        avg_accuracy: mean_over_benchmarks(&per_benchmark_accuracy),
        total_cost,
        per_benchmark_accuracy,
        usage_proportion: counts
            .iter()
            .map(|(id, &c)| (id.clone(), c as f64 / n as f64))
            .collect(),
        usage_counts: counts,
        unavailable_hits,
    })
}

/// Routes and scores `test_records` under `cfg`.
pub fn evaluate_routing(
    router: &Router,
    test_records: &[EvalRecord],
    cfg: &TradeoffConfig,
    cache: Option<&HashMap<String, EmbeddingVector>>,
) -> Result<RoutingReport, ReplayError> {
    if test_records.is_empty() {
        return Err(ReplayError::NoRecords);
    }
    let embeddings = embed_for_replay(router, test_records, cache)?;
    let decisions = route_all(router, &embeddings, cfg)?;
    score_decisions(test_records, &decisions, &router.artifact().registry, cfg)
}

/// One report per alpha, sorted by alpha, all from the same router and embeddings.
/// `top_p` comes from the artifact defaults.
pub fn sweep_alpha(
    router: &Router,
    test_records: &[EvalRecord],
    alphas: &[f64],
    cache: Option<&HashMap<String, EmbeddingVector>>,
) -> Result<Vec<RoutingReport>, ReplayError> {
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(ReplayError::InvalidSweep(format!("alpha {a} outside [0, 1]")));
    }
    if test_records.is_empty() {
        return Err(ReplayError::NoRecords);
    }
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let embeddings = embed_for_replay(router, test_records, cache)?;
    let top_p = router.artifact().default_cfg.top_p;
    sorted
        .into_iter()
        .map(|alpha| {
            let cfg = TradeoffConfig { alpha, top_p };
            let decisions = route_all(router, &embeddings, &cfg)?;
            score_decisions(test_records, &decisions, &router.artifact().registry, &cfg)
        })
        .collect()
}

/// `n` evenly spaced alphas from 0 to 1 inclusive.
pub fn alpha_grid(n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Every registry model served alone on `records`.
pub fn single_model_baselines(records: &[EvalRecord], registry: &ModelRegistry) -> Result<Vec<ModelBaseline>, ReplayError> {
    registry
        .models()
        .iter()
        .map(|m| {
            let mut bench: BTreeMap<String, (BenchAcc, usize)> = BTreeMap::new();
            let mut total_cost = 0.0;
            for r in records {
                let res = r.result(&m.id).ok_or_else(|| ReplayError::IncompleteProfile {
                    query_id: r.query_id.clone(),
                    model: m.id.to_string(),
                })?;
                let (acc, available) = bench.entry(r.benchmark_tag.clone()).or_default();
                acc.score += res.score();
                acc.n += 1;
                if res.is_available() {
                    *available += 1;
                }
                total_cost += res.cost_usd();
            }
            let all: BTreeMap<String, f64> = bench
                .iter()
                .map(|(k, (a, _))| (k.clone(), a.score / a.n as f64))
                .collect();
            let available: BTreeMap<String, f64> = bench
                .iter()
                .filter(|(_, (_, avail))| *avail > 0)
                .map(|(k, (a, _))| (k.clone(), a.score / a.n as f64))
                .collect();
            Ok(ModelBaseline {
                model: m.id.clone(),
                display_name: m.display_name.clone(),
                avg_accuracy: mean_over_benchmarks(&all),
                avg_accuracy_available: mean_over_benchmarks(&available),
                total_cost,
                per_benchmark_accuracy: bench
                    .iter()
                    .map(|(k, (a, avail))| {
                        (k.clone(), (*avail > 0).then(|| a.score / a.n as f64))
                    })
                    .collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub label: String,
    pub cost: f64,
    pub accuracy: f64,
}

/// Everything the `sweep` and `report` commands emit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub artifact_digest: String,
    pub router: Vec<RoutingReport>,
    pub baselines: Vec<ModelBaseline>,
    /// Non-dominated points among router and single-model operating points.
    pub frontier: Vec<FrontierPoint>,
}

impl SweepReport {
    pub fn new(artifact_digest: String, router: Vec<RoutingReport>, baselines: Vec<ModelBaseline>) -> Self {
        let mut labeled: Vec<FrontierPoint> = router
            .iter()
            .map(|r| FrontierPoint {
                label: format!("router(alpha={})", r.alpha),
                cost: r.total_cost,
                accuracy: r.avg_accuracy,
            })
            .collect();
        labeled.extend(baselines.iter().map(|b| FrontierPoint {
            label: b.model.to_string(),
            cost: b.total_cost,
            accuracy: b.avg_accuracy,
        }));
        let pts: Vec<(f64, f64)> = labeled.iter().map(|p| (p.cost, p.accuracy)).collect();
        let frontier = pareto_indices(&pts).into_iter().map(|i| labeled[i].clone()).collect();
        Self {
            artifact_digest,
            router,
            baselines,
            frontier,
        }
    }

    /// `alpha,avg_accuracy,total_cost` rows for plotting.
    pub fn plot_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["alpha", "avg_accuracy", "total_cost"]).expect("in-memory write");
        for r in &self.router {
            w.serialize((r.alpha, r.avg_accuracy, r.total_cost)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// Markdown tables: accuracy and cost per setting, then routing shares per alpha.
    pub fn to_markdown(&self) -> String {
        let benchmarks: Vec<String> = self
            .router
            .first()
            .map(|r| r.per_benchmark_accuracy.keys().cloned().collect())
            .or_else(|| {
                self.baselines
                    .first()
                    .map(|b| b.per_benchmark_accuracy.keys().cloned().collect())
            })
            .unwrap_or_default();
        let pct = |v: f64| format!("{:.2}", v * 100.0);
        let mut out = String::new();
        let mut footnotes = Vec::new();

        let _ = write!(out, "| Setting |");
        for b in &benchmarks {
            let _ = write!(out, " {b} |");
        }
        let _ = writeln!(out, " Avg. A | Avg. A (available) | Cost |");
        let _ = write!(out, "|---|");
        for _ in &benchmarks {
            let _ = write!(out, "---:|");
        }
        let _ = writeln!(out, "---:|---:|---:|");

        for b in &self.baselines {
            let _ = write!(out, "| {} |", b.display_name);
            for bench in &benchmarks {
                match b.per_benchmark_accuracy.get(bench).copied().flatten() {
                    Some(v) => {
                        let _ = write!(out, " {} |", pct(v));
                    }
                    None => {
                        footnotes.push(format!(
                            "{} has no available result on {bench}; Avg. A counts it as 0, Avg. A (available) omits it.",
                            b.display_name
                        ));
                        let _ = write!(out, " -{} |", "*".repeat(footnotes.len()));
                    }
                }
            }
            let _ = writeln!(
                out,
                " {} | {} | ${:.2} |",
                pct(b.avg_accuracy),
                pct(b.avg_accuracy_available),
                b.total_cost
            );
        }
        for r in &self.router {
            let _ = write!(out, "| Router (alpha={}) |", r.alpha);
            for bench in &benchmarks {
                let v = r.per_benchmark_accuracy.get(bench).copied().unwrap_or(0.0);
                match r.unavailable_hits.get(bench) {
                    Some(n) => {
                        footnotes.push(format!(
                            "Router (alpha={}) sent {n} {bench} queries to an unavailable model.",
                            r.alpha
                        ));
                        let _ = write!(out, " {}{} |", pct(v), "*".repeat(footnotes.len()));
                    }
                    None => {
                        let _ = write!(out, " {} |", pct(v));
                    }
                }
            }
            let _ = writeln!(
                out,
                " {} | {} | ${:.2} |",
                pct(r.avg_accuracy),
                pct(r.avg_accuracy),
                r.total_cost
            );
        }
        for (i, f) in footnotes.iter().enumerate() {
            if i == 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "{} {f}", "*".repeat(i + 1));
        }

        if let Some(first) = self.router.first() {
            let models: Vec<&ModelId> = first.usage_proportion.keys().collect();
            let _ = write!(out, "\n| alpha |");
            for m in &models {
                let _ = write!(out, " {m} |");
            }
            let _ = write!(out, "\n|---:|");
            for _ in &models {
                let _ = write!(out, "---:|");
            }
            out.push('\n');
            for r in &self.router {
                let _ = write!(out, "| {} |", r.alpha);
                for m in &models {
                    let _ = write!(out, " {} |", pct(r.usage_proportion.get(*m).copied().unwrap_or(0.0)));
                }
                out.push('\n');
            }
        }

        if !self.frontier.is_empty() {
            let _ = writeln!(out, "\nPareto frontier (ascending cost):\n");
            for p in &self.frontier {
                let _ = writeln!(out, "- {}: {} at ${:.4}", p.label, pct(p.accuracy), p.cost);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::ModelResult;
    use crate::types::ModelEntry;

    fn reg() -> ModelRegistry {
        ModelRegistry::new(
            ["a", "b"]
                .iter()
                .map(|id| ModelEntry {
                    id: ModelId::new(*id).unwrap(),
                    display_name: id.to_uppercase(),
                    input_price: 1.0,
                    output_price: 1.0,
                    upstream: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn rec(id: &str, bench: &str, a: f64, b: Option<f64>) -> EvalRecord {
        let mut results = BTreeMap::new();
        results.insert(
            ModelId::new("a").unwrap(),
            ModelResult::Available { score: a, cost_usd: 1.0, input_tokens: 0, output_tokens: 0 },
        );
        results.insert(
            ModelId::new("b").unwrap(),
            match b {
                Some(s) => ModelResult::Available { score: s, cost_usd: 2.0, input_tokens: 0, output_tokens: 0 },
                None => ModelResult::Unavailable,
            },
        );
        EvalRecord {
            query_id: id.into(),
            query_text: id.into(),
            benchmark_tag: bench.into(),
            results,
        }
    }

    fn decision(model: &str) -> RoutingDecision {
        RoutingDecision {
            chosen: ModelId::new(model).unwrap(),
            scores: BTreeMap::new(),
            nearest_clusters: vec![],
            alpha_used: 0.5,
            tie_broken: false,
        }
    }

    #[test]
    fn avg_is_unweighted_over_benchmarks() {
        let recs = vec![
            rec("1", "x", 1.0, Some(0.0)),
            rec("2", "x", 1.0, Some(0.0)),
            rec("3", "x", 1.0, Some(0.0)),
            rec("4", "y", 0.0, Some(1.0)),
        ];
        let ds: Vec<_> = ["a", "a", "a", "a"].iter().map(|m| decision(m)).collect();
        let cfg = TradeoffConfig { alpha: 0.5, top_p: 1 };
        let r = score_decisions(&recs, &ds, &reg(), &cfg).unwrap();
        assert_eq!(r.per_benchmark_accuracy["x"], 1.0);
        assert_eq!(r.per_benchmark_accuracy["y"], 0.0);
        assert_eq!(r.avg_accuracy, 0.5);
        assert_eq!(r.total_cost, 4.0);
        assert_eq!(r.usage_proportion[&ModelId::new("b").unwrap()], 0.0);
    }

    #[test]
    fn unavailable_cells_footnoted() {
        let recs = vec![rec("1", "x", 1.0, Some(1.0)), rec("2", "tools", 1.0, None)];
        let base = single_model_baselines(&recs, &reg()).unwrap();
        assert_eq!(base[1].per_benchmark_accuracy["tools"], None);
        assert_eq!(base[1].avg_accuracy, 0.5);
        assert_eq!(base[1].avg_accuracy_available, 1.0);

        let ds = vec![decision("b"), decision("b")];
        let cfg = TradeoffConfig { alpha: 1.0, top_p: 1 };
        let r = score_decisions(&recs, &ds, &reg(), &cfg).unwrap();
        assert_eq!(r.unavailable_hits["tools"], 1);
        let md = SweepReport::new("d".into(), vec![r], base).to_markdown();
        assert!(md.contains("B has no available result on tools"));
        assert!(md.contains("sent 1 tools queries to an unavailable model"));
    }

    #[test]
    fn missing_routed_result_is_error() {
        let mut r = rec("1", "x", 1.0, Some(1.0));
        r.results.remove(&ModelId::new("b").unwrap());
        let cfg = TradeoffConfig { alpha: 1.0, top_p: 1 };
        assert!(matches!(
            score_decisions(&[r], &[decision("b")], &reg(), &cfg),
            Err(ReplayError::IncompleteProfile { .. })
        ));
    }

    #[test]
    fn grid_endpoints() {
        let g = alpha_grid(21);
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[20], 1.0);
        assert_eq!(g[10], 0.5);
    }
}
