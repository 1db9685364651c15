//! Synthetic evaluation data for exercising the pipeline without real models.
//!
//! Queries are drawn from `n_clusters` disjoint topic vocabularies, so the
//! hashing embedder separates them cleanly. Each model is a specialist on the
//! topics it is "home" to and a generalist elsewhere, with general competence
//! rising with price. `specialization` blends the two: at 1.0 a model answers
//! only its home topics, at 0.0 it answers everything at its general rate.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ClusteringConfig, SplitConfig, TrainConfig};
use crate::embedding::{Embedder, EmbeddingProviderConfig, HashingEmbedder};
use crate::error::EmbeddingError;
use crate::pricing::{compute_request_cost, default_models};
use crate::records::{EmbeddingRow, EvalRecord, ModelResult};
use crate::types::{ModelEntry, ModelId, TradeoffConfig};

/// Cheapest and priciest input price ($/1M tokens) of the geometric price ladder.
pub const PRICE_FLOOR: f64 = 0.13;
pub const PRICE_CEILING: f64 = 15.0;
const OUTPUT_TO_INPUT: f64 = 5.0;
/// Enough k-means restarts that merged topics are rare on these fixtures.
const FIXTURE_RESTARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixturePricing {
    /// Input prices spaced geometrically from `PRICE_FLOOR` to `PRICE_CEILING`.
    Geometric,
    /// The default eight-model pool and its list prices. Needs `n_models <= 8`.
    DefaultPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub n_clusters: usize,
    pub n_models: usize,
    pub n_queries: usize,
    pub specialization: f64,
    /// Embedding dimension of the generated config and sidecar.
    pub dim: usize,
    pub pricing: FixturePricing,
    /// `top_p` written into the generated config.
    pub top_p: usize,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            n_clusters: 8,
            n_models: 5,
            n_queries: 1200,
            specialization: 0.7,
            dim: 256,
            pricing: FixturePricing::Geometric,
            top_p: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub records: Vec<EvalRecord>,
    /// Training config matching the fixture (models, dim, k = n_clusters).
    pub config: TrainConfig,
    pub embeddings: Vec<EmbeddingRow>,
    /// Generating topic of each record.
    pub topics: Vec<usize>,
    /// Home topics of each model, in registry order.
    pub home_topics: Vec<Vec<usize>>,
}

const WORDS_PER_TOPIC: usize = 12;
const WORDS_PER_QUERY: usize = 7;
const SYLLABLES: [&str; 20] = [
    "ka", "lo", "mi", "ne", "ru", "sa", "te", "vo", "zi", "pa", "do", "fe", "gu", "ha", "ji", "bo",
    "ce", "wu", "xi", "yo",
];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=4);
    (0..n).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect()
}

fn models_for(spec: &FixtureSpec) -> Result<Vec<ModelEntry>, String> {
    match spec.pricing {
        FixturePricing::Geometric => Ok((0..spec.n_models)
            .map(|m| {
                let t = if spec.n_models == 1 {
                    0.0
                } else {
                    m as f64 / (spec.n_models - 1) as f64
                };
                let input = PRICE_FLOOR * (PRICE_CEILING / PRICE_FLOOR).powf(t);
                ModelEntry {
                    id: ModelId::new(format!("model-{m}")).expect("non-empty"),
                    display_name: format!("Model {m}"),
                    input_price: input,
                    output_price: input * OUTPUT_TO_INPUT,
                    upstream: None,
                }
            })
            .collect()),
        FixturePricing::DefaultPool => {
            let mut pool = default_models();
            if spec.n_models > pool.len() {
                return Err(format!(
                    "the default pool has {} models, {} requested",
                    pool.len(),
                    spec.n_models
                ));
            }
            pool.truncate(spec.n_models);
            Ok(pool)
        }
    }
}

/// Generates records, a matching config, and the embedding sidecar.
pub fn generate(spec: &FixtureSpec) -> Result<Fixture, String> {
    if spec.n_clusters == 0 || spec.n_models == 0 || spec.n_queries == 0 || spec.dim == 0 {
        return Err("n_clusters, n_models, n_queries and dim must be positive".into());
    }
    if !(0.0..=1.0).contains(&spec.specialization) {
        return Err("specialization must lie in [0, 1]".into());
    }
    if spec.top_p == 0 || spec.top_p > spec.n_clusters {
        return Err("top_p must lie in 1..=n_clusters".into());
    }
    let models = models_for(spec)?;
    let m = models.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut seen = HashSet::new();
    let vocab: Vec<Vec<String>> = (0..spec.n_clusters)
        .map(|_| {
            let mut words = Vec::with_capacity(WORDS_PER_TOPIC);
            while words.len() < WORDS_PER_TOPIC {
                let w = pseudo_word(&mut rng);
                if seen.insert(w.clone()) {
                    words.push(w);
                }
            }
            words
        })
        .collect();

    // Competence rises with price rank.
    let mut by_price: Vec<usize> = (0..m).collect();
    by_price.sort_by(|&a, &b| models[a].input_price.total_cmp(&models[b].input_price).then(a.cmp(&b)));
    let mut competence = vec![0.0; m];
    for (rank, &i) in by_price.iter().enumerate() {
        competence[i] = if m == 1 { 0.5 } else { 0.2 + 0.5 * rank as f64 / (m - 1) as f64 };
    }
    let home_topics: Vec<Vec<usize>> = (0..m)
        .map(|i| (0..spec.n_clusters).filter(|c| c % m == i).collect())
        .collect();

    let n_bench = spec.n_clusters.min(6);
    let s = spec.specialization;
    let mut records = Vec::with_capacity(spec.n_queries);
    let mut topics = Vec::with_capacity(spec.n_queries);
    for q in 0..spec.n_queries {
        let topic = q % spec.n_clusters;
        let words: Vec<&str> = (0..WORDS_PER_QUERY)
            .map(|_| vocab[topic].choose(&mut rng).expect("non-empty").as_str())
            .collect();
        let input_tokens = rng.random_range(100..=2000u64);
        let output_tokens = rng.random_range(50..=1500u64);
        let results = models
            .iter()
            .enumerate()
            .map(|(i, model)| {
                let home = if topic % m == i { 1.0 } else { 0.0 };
                let p = s * home + (1.0 - s) * competence[i];
                let u: f64 = rng.random();
                let score = if u < p { 1.0 } else { 0.0 };
                (
                    model.id.clone(),
                    ModelResult::Available {
                        score,
                        cost_usd: compute_request_cost(input_tokens, output_tokens, model),
                        input_tokens,
                        output_tokens,
                    },
                )
            })
            .collect();
        records.push(EvalRecord {
            query_id: format!("fx-{q:05}"),
            query_text: format!("{}?", words.join(" ")),
            benchmark_tag: format!("bench-{}", topic % n_bench),
            results,
        });
        topics.push(topic);
    }

    let embedder = HashingEmbedder::new(spec.dim);
    let texts: Vec<String> = records.iter().map(|r| r.query_text.clone()).collect();
    let vectors = embedder
        .embed_batch(&texts)
        .map_err(|e: EmbeddingError| e.to_string())?;
    let embeddings = records
        .iter()
        .zip(vectors)
        .map(|(r, embedding)| EmbeddingRow {
            query_id: r.query_id.clone(),
            embedding,
        })
        .collect();

    let config = TrainConfig {
        split: SplitConfig {
            train_fraction: 0.7,
            seed: spec.seed,
        },
        clustering: ClusteringConfig {
            k: spec.n_clusters,
            seed: spec.seed,
            n_init: FIXTURE_RESTARTS,
            ..Default::default()
        },
        tradeoff: TradeoffConfig {
            alpha: 0.5,
            top_p: spec.top_p,
        },
        embedding: EmbeddingProviderConfig::deterministic(spec.dim),
        models,
    };

    Ok(Fixture {
        records,
        config,
        embeddings,
        topics,
        home_topics,
    })
}
