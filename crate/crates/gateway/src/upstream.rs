//! Forwarding to upstream chat-completions endpoints.

use std::time::{Duration, Instant};

use bytes::Bytes;
use reqwest::header::{HeaderValue, AUTHORIZATION, CONTENT_TYPE};
use reqwest::StatusCode;
use serde_json::Value;

use crate::audit::Usage;
use crate::config::ResolvedUpstream;

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl RetryPolicy {
    /// Delay after failed attempt `n` (1-based).
    pub fn delay_after(&self, n: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << (n - 1).min(16))
    }
}

#[derive(Debug)]
pub struct UpstreamReply {
    pub status: StatusCode,
    pub content_type: Option<HeaderValue>,
    pub body: Bytes,
    pub attempts: u32,
    pub latency: Duration,
}

#[derive(Debug)]
pub struct UpstreamFailure {
    pub attempts: u32,
    pub last_status: Option<StatusCode>,
    pub message: String,
    pub latency: Duration,
}

fn retryable(status: StatusCode) -> bool {
    status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS
}

/// Posts `body` with its `model` field replaced by the upstream model name.
/// Retries on transport errors, 5xx and 429; any other response is returned as-is.
pub async fn forward(
    client: &reqwest::Client,
    upstream: &ResolvedUpstream,
    body: &Value,
    policy: RetryPolicy,
) -> Result<UpstreamReply, UpstreamFailure> {
    let mut body = body.clone();
    if let Some(obj) = body.as_object_mut() {
        obj.insert("model".into(), Value::String(upstream.model.clone()));
    }
    let url = upstream.chat_completions_url();
    let start = Instant::now();
    let mut last_status = None;
    let mut message = String::new();
    for attempt in 1..=policy.attempts {
        let mut req = client.post(&url).json(&body);
        if let Some(key) = &upstream.api_key {
            req = req.header(AUTHORIZATION, format!("Bearer {key}"));
        }
        match req.send().await {
            Ok(resp) if !retryable(resp.status()) => {
                let status = resp.status();
                let content_type = resp.headers().get(CONTENT_TYPE).cloned();
                match resp.bytes().await {
                    Ok(body) => {
                        return Ok(UpstreamReply {
                            status,
                            content_type,
                            body,
                            attempts: attempt,
                            latency: start.elapsed(),
                        })
                    }
                    Err(e) => message = format!("reading upstream body: {e}"),
                }
            }
            Ok(resp) => {
                last_status = Some(resp.status());
                message = format!("upstream returned {}", resp.status());
            }
            Err(e) => message = format!("upstream request failed: {e}"),
        }
        tracing::warn!(url = %url, attempt, %message, "upstream attempt failed");
        if attempt < policy.attempts {
            tokio::time::sleep(policy.delay_after(attempt)).await;
        }
    }
    Err(UpstreamFailure {
        attempts: policy.attempts,
        last_status,
        message,
        latency: start.elapsed(),
    })
}

fn usage_of(v: &Value) -> Option<Usage> {
    let u = v.get("usage")?;
    Some(Usage {
        prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
        completion_tokens: u.get("completion_tokens")?.as_u64()?,
    })
}

/// Token usage from a JSON completion or, for SSE streams, the last chunk carrying `usage`.
pub fn parse_usage(body: &[u8]) -> Option<Usage> {
    if let Ok(v) = serde_json::from_slice::<Value>(body) {
        return usage_of(&v);
    }
    let text = std::str::from_utf8(body).ok()?;
    text.lines()
        .filter_map(|l| l.trim().strip_prefix("data:"))
        .map(str::trim)
        .filter(|d| *d != "[DONE]")
        .filter_map(|d| serde_json::from_str::<Value>(d).ok())
        .filter_map(|v| usage_of(&v))
        .last()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(100),
        };
        assert_eq!(p.delay_after(1), Duration::from_millis(100));
        assert_eq!(p.delay_after(2), Duration::from_millis(200));
        assert_eq!(p.delay_after(3), Duration::from_millis(400));
    }

    #[test]
    fn usage_from_json() {
        let body = br#"{"choices":[],"usage":{"prompt_tokens":12,"completion_tokens":34,"total_tokens":46}}"#;
        assert_eq!(
            parse_usage(body),
            Some(Usage {
                prompt_tokens: 12,
                completion_tokens: 34
            })
        );
        assert_eq!(parse_usage(br#"{"choices":[]}"#), None);
    }

    #[test]
    fn usage_from_sse() {
        let body = b"data: {\"choices\":[{\"delta\":{\"content\":\"hi\"}}]}\n\n\
data: {\"choices\":[],\"usage\":{\"prompt_tokens\":5,\"completion_tokens\":7}}\n\n\
data: [DONE]\n\n";
        assert_eq!(
            parse_usage(body),
            Some(Usage {
                prompt_tokens: 5,
                completion_tokens: 7
            })
        );
    }
}
