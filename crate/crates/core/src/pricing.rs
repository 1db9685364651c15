//! Token pricing and the shipped default model pool.

use crate::types::{ModelEntry, ModelId, ModelRegistry, UpstreamEndpoint};

const OPENROUTER: &str = "https://openrouter.ai/api/v1";
const OPENROUTER_KEY: &str = "OPENROUTER_API_KEY";

/// USD charged for one request: `in * input_price / 1e6 + out * output_price / 1e6`.
pub fn compute_request_cost(input_tokens: u64, output_tokens: u64, model: &ModelEntry) -> f64 {
    input_tokens as f64 * model.input_price / 1e6 + output_tokens as f64 * model.output_price / 1e6
}

/// (id, display name, upstream model, $/1M input, $/1M output), OpenRouter list prices.
const DEFAULT_POOL: [(&str, &str, &str, f64, f64); 8] = [
    ("gemini-2.5-flash", "Gemini-2.5-flash", "google/gemini-2.5-flash", 0.30, 2.50),
    ("gemini-2.5-pro", "Gemini-2.5-Pro", "google/gemini-2.5-pro", 1.25, 10.0),
    ("claude-opus-4.1", "Claude-4.1-opus", "anthropic/claude-opus-4.1", 15.0, 75.0),
    ("claude-sonnet-4", "Claude-4-sonnet", "anthropic/claude-sonnet-4", 3.0, 15.0),
    ("gpt-5-chat", "GPT-5-chat", "openai/gpt-5-chat", 1.25, 10.0),
    ("gpt-5-medium", "GPT-5-medium", "openai/gpt-5", 1.25, 10.0),
    ("qwen3-235b-a22b-2507", "Qwen3-235B-A22B-2507", "qwen/qwen3-235b-a22b-2507", 0.13, 0.6),
    (
        "qwen3-235b-a22b-thinking-2507",
        "Qwen3-235B-A22B-thinking-2507",
        "qwen/qwen3-235b-a22b-thinking-2507",
        0.13,
        0.6,
    ),
];

/// The default eight-model pool, all served through OpenRouter.
pub fn default_models() -> Vec<ModelEntry> {
    DEFAULT_POOL
        .iter()
        .map(|&(id, name, upstream, input_price, output_price)| ModelEntry {
            id: ModelId::new(id).expect("static id"),
            display_name: name.into(),
            input_price,
            output_price,
            upstream: Some(UpstreamEndpoint {
                base_url: OPENROUTER.into(),
                model: upstream.into(),
                api_key_env: Some(OPENROUTER_KEY.into()),
            }),
        })
        .collect()
}

pub fn default_registry() -> ModelRegistry {
    ModelRegistry::new(default_models()).expect("static registry is valid")
}
