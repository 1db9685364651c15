use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use arbiter_core::error::{RouteError, ScoringError};
use arbiter_core::pricing::compute_request_cost;
use arbiter_core::{ModelId, Router, RoutingDecision, TradeoffConfig};
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::audit::{query_digest, AuditRecord, AuditSink, JsonLinesSink};
use crate::config::{GatewayConfig, ResolvedUpstream};
use crate::error::GatewayError;
use crate::metrics::Metrics;
use crate::upstream::{forward, parse_usage, RetryPolicy};

pub const ROUTED_MODEL_HEADER: &str = "x-routed-model";
pub const ROUTING_ALPHA_HEADER: &str = "x-routing-alpha";

pub struct GatewayState {
    router: Arc<Router>,
    upstreams: HashMap<ModelId, ResolvedUpstream>,
    client: reqwest::Client,
    audit: Arc<dyn AuditSink>,
    metrics: Arc<Metrics>,
    default_cfg: TradeoffConfig,
    retry: RetryPolicy,
    failover: bool,
}

impl GatewayState {
    pub fn new(
        router: Router,
        cfg: &GatewayConfig,
        audit: Arc<dyn AuditSink>,
    ) -> Result<Self, GatewayError> {
        let registry = &router.artifact().registry;
        let upstreams = cfg.resolve_upstreams(registry)?;
        let mut default_cfg = router.artifact().default_cfg;
        if let Some(alpha) = cfg.alpha {
            default_cfg.alpha = alpha;
        }
        router
            .effective_cfg(Some(default_cfg))
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        let client = reqwest::Client::builder().timeout(cfg.timeout()).build()?;
        let metrics = Arc::new(Metrics::new(registry.models().iter().map(|m| &m.id)));
        Ok(Self {
            router: Arc::new(router),
            upstreams,
            client,
            audit,
            metrics,
            default_cfg,
            retry: RetryPolicy {
                attempts: cfg.retry_attempts,
                base_delay: std::time::Duration::from_millis(cfg.retry_base_ms),
            },
            failover: cfg.failover,
        })
    }

    pub fn metrics(&self) -> &Arc<Metrics> {
        &self.metrics
    }
}

/// The configured audit destination: the `audit_log` file, or stderr.
pub fn audit_sink(cfg: &GatewayConfig) -> Result<Arc<dyn AuditSink>, GatewayError> {
    Ok(match &cfg.audit_log {
        Some(p) => Arc::new(JsonLinesSink::append_to(p)?),
        None => Arc::new(JsonLinesSink::new(std::io::stderr())),
    })
}

pub fn app(state: Arc<GatewayState>) -> axum::Router {
    axum::Router::new()
        .route("/v1/chat/completions", post(chat_completions))
        .route("/v1/route", post(route_only))
        .route("/healthz", get(healthz))
        .route("/metrics", get(metrics))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, state: Arc<GatewayState>) -> std::io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "gateway listening");
    axum::serve(listener, app(state)).await
}

fn error_response(status: StatusCode, kind: &str, message: impl Into<String>) -> Response {
    (
        status,
        Json(json!({"error": {"message": message.into(), "type": kind}})),
    )
        .into_response()
}

fn route_error_response(e: &RouteError) -> Response {
    match e {
        RouteError::EmptyQuery | RouteError::Scoring(ScoringError::InvalidConfig(_)) => {
            error_response(StatusCode::BAD_REQUEST, "invalid_request_error", e.to_string())
        }
        RouteError::Embedding(_) => {
            error_response(StatusCode::SERVICE_UNAVAILABLE, "embedding_error", e.to_string())
        }
        _ => error_response(StatusCode::INTERNAL_SERVER_ERROR, "routing_error", e.to_string()),
    }
}

/// Text of the most recent user message; list-of-parts content keeps only text parts.
pub fn latest_user_text(body: &Value) -> Option<String> {
    let msg = body
        .get("messages")?
        .as_array()?
        .iter()
        .rev()
        .find(|m| m.get("role").and_then(Value::as_str) == Some("user"))?;
    match msg.get("content")? {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => {
            let texts: Vec<&str> = parts
                .iter()
                .filter(|p| p.get("type").and_then(Value::as_str) == Some("text"))
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect();
            (!texts.is_empty()).then(|| texts.join("\n"))
        }
        _ => None,
    }
}

async fn route_timed(
    state: &Arc<GatewayState>,
    text: String,
    cfg: TradeoffConfig,
) -> Result<(RoutingDecision, f64), Response> {
    let router = state.router.clone();
    let start = Instant::now();
    let out = tokio::task::spawn_blocking(move || router.route(&text, Some(cfg)))
        .await
        .map_err(|e| {
            error_response(StatusCode::INTERNAL_SERVER_ERROR, "routing_error", e.to_string())
        })?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    match out {
        Ok(d) => {
            state.metrics.record_route_latency(ms);
            Ok((d, ms))
        }
        Err(e) => {
            state.metrics.record_route_error();
            Err(route_error_response(&e))
        }
    }
}

fn alpha_override(headers: &HeaderMap, base: TradeoffConfig) -> Result<TradeoffConfig, Response> {
    let Some(raw) = headers.get(ROUTING_ALPHA_HEADER) else {
        return Ok(base);
    };
    let alpha = raw
        .to_str()
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|a| (0.0..=1.0).contains(a))
        .ok_or_else(|| {
            error_response(
                StatusCode::BAD_REQUEST,
                "invalid_request_error",
                format!("{ROUTING_ALPHA_HEADER} must be a number in [0, 1]"),
            )
        })?;
    Ok(TradeoffConfig { alpha, ..base })
}

fn routing_headers(resp: &mut Response, model: &ModelId, alpha: f64) {
    let h = resp.headers_mut();
    if let Ok(v) = HeaderValue::from_str(model.as_str()) {
        h.insert(ROUTED_MODEL_HEADER, v);
    }
    if let Ok(v) = HeaderValue::from_str(&alpha.to_string()) {
        h.insert(ROUTING_ALPHA_HEADER, v);
    }
}

async fn chat_completions(
    State(state): State<Arc<GatewayState>>,
    headers: HeaderMap,
    body: axum::body::Bytes,
) -> Response {
    let body: Value = match serde_json::from_slice(&body) {
        Ok(v @ Value::Object(_)) => v,
        _ => {
            return error_response(
                StatusCode::BAD_REQUEST,
                "invalid_request_error",
                "request body must be a JSON object",
            )
        }
    };
    let Some(text) = latest_user_text(&body) else {
        return error_response(
            StatusCode::BAD_REQUEST,
            "invalid_request_error",
            "messages must contain a user message with text content",
        );
    };
    let cfg = match alpha_override(&headers, state.default_cfg) {
        Ok(c) => c,
        Err(r) => return r,
    };
    let digest = query_digest(&text);
    let (decision, route_ms) = match route_timed(&state, text, cfg).await {
        Ok(x) => x,
        Err(r) => return r,
    };

    let candidates = if state.failover {
        decision.ranked()
    } else {
        vec![decision.chosen.clone()]
    };
    let mut attempts = 0;
    let mut upstream_ms = 0.0;
    let mut last_failure = String::new();
    let mut last_status = None;
    for model in &candidates {
        let upstream = &state.upstreams[model];
        match forward(&state.client, upstream, &body, state.retry).await {
            Ok(reply) => {
                attempts += reply.attempts;
                upstream_ms += reply.latency.as_secs_f64() * 1e3;
                let usage = parse_usage(&reply.body);
                let entry = state
                    .router
                    .artifact()
                    .registry
                    .get(model)
                    .expect("upstreams cover the registry");
                let cost = usage.map_or(0.0, |u| {
                    compute_request_cost(u.prompt_tokens, u.completion_tokens, entry)
                });
                state.metrics.record_served(model, cost);
                state.audit.record(&AuditRecord {
                    timestamp: chrono::Utc::now(),
                    query_digest: digest,
                    decision: decision.clone(),
                    served_model: Some(model.clone()),
                    upstream_status: Some(reply.status.as_u16()),
                    attempts,
                    route_latency_ms: route_ms,
                    upstream_latency_ms: upstream_ms,
                    usage,
                    cost_usd: cost,
                });
                let mut resp = (reply.status, reply.body).into_response();
                if let Some(ct) = reply.content_type {
                    resp.headers_mut().insert(header::CONTENT_TYPE, ct);
                }
                routing_headers(&mut resp, model, decision.alpha_used);
                return resp;
            }
            Err(f) => {
                attempts += f.attempts;
                upstream_ms += f.latency.as_secs_f64() * 1e3;
                state.metrics.record_upstream_failure(model);
                last_failure = format!("{model}: {}", f.message);
                last_status = f.last_status.map(|s| s.as_u16());
            }
        }
    }

    state.audit.record(&AuditRecord {
        timestamp: chrono::Utc::now(),
        query_digest: digest,
        decision: decision.clone(),
        served_model: None,
        upstream_status: last_status,
        attempts,
        route_latency_ms: route_ms,
        upstream_latency_ms: upstream_ms,
        usage: None,
        cost_usd: 0.0,
    });
    let mut resp = (
        StatusCode::BAD_GATEWAY,
        Json(json!({
            "error": {"message": last_failure, "type": "upstream_error"},
            "routing_decision": decision,
        })),
    )
        .into_response();
    routing_headers(&mut resp, &decision.chosen, decision.alpha_used);
    resp
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouteRequest {
    query: String,
    alpha: Option<f64>,
    top_p: Option<usize>,
}

async fn route_only(
    State(state): State<Arc<GatewayState>>,
    headers: HeaderMap,
    body: axum::body::Bytes,
) -> Response {
    let req: RouteRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return error_response(StatusCode::BAD_REQUEST, "invalid_request_error", e.to_string())
        }
    };
    let mut cfg = match alpha_override(&headers, state.default_cfg) {
        Ok(c) => c,
        Err(r) => return r,
    };
    if let Some(a) = req.alpha {
        cfg.alpha = a;
    }
    if let Some(p) = req.top_p {
        cfg.top_p = p;
    }
    match route_timed(&state, req.query, cfg).await {
        Ok((d, _)) => {
            let (chosen, alpha) = (d.chosen.clone(), d.alpha_used);
            let mut resp = Json(d).into_response();
            routing_headers(&mut resp, &chosen, alpha);
            resp
        }
        Err(r) => r,
    }
}

async fn healthz(State(state): State<Arc<GatewayState>>) -> Response {
    Json(json!({
        "status": "ok",
        "artifact_digest": state.router.artifact().content_digest,
        "models": state.router.artifact().registry.len(),
    }))
    .into_response()
}

async fn metrics(State(state): State<Arc<GatewayState>>) -> Response {
    (
        [(header::CONTENT_TYPE, "text/plain; version=0.0.4")],
        state.metrics.render(),
    )
        .into_response()
}
