use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use arbiter_core::fixture::{generate, FixtureSpec};
use arbiter_core::pipeline::train;
use arbiter_core::{ModelId, Router, RoutingDecision, UpstreamEndpoint};
use arbiter_gateway::{GatewayConfig, GatewayState, MemorySink, ROUTED_MODEL_HEADER, ROUTING_ALPHA_HEADER};
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Json;
use serde_json::{json, Value};

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Ok,
    Sse,
    Fail,
}

#[derive(Clone)]
struct Upstream {
    mode: Arc<Mutex<BTreeMap<String, Mode>>>,
    /// (upstream model, authorization header) per received request.
    seen: Arc<Mutex<Vec<(String, Option<String>)>>>,
}

async fn completions(State(u): State<Upstream>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
    let model = body["model"].as_str().unwrap_or_default().to_owned();
    let auth = headers
        .get("authorization")
        .map(|v| v.to_str().unwrap().to_owned());
    u.seen.lock().unwrap().push((model.clone(), auth));
    let mode = u.mode.lock().unwrap().get(&model).copied().unwrap_or(Mode::Ok);
    match mode {
        Mode::Fail => (StatusCode::INTERNAL_SERVER_ERROR, "boom").into_response(),
        Mode::Ok => Json(json!({
            "id": "x",
            "object": "chat.completion",
            "model": model,
            "choices": [{"index": 0, "message": {"role": "assistant", "content": "hi"}, "finish_reason": "stop"}],
            "usage": {"prompt_tokens": 1000, "completion_tokens": 500, "total_tokens": 1500}
        }))
        .into_response(),
        Mode::Sse => (
            [("content-type", "text/event-stream")],
            "data: {\"choices\":[{\"delta\":{\"content\":\"hi\"}}]}\n\n\
data: {\"choices\":[],\"usage\":{\"prompt_tokens\":10,\"completion_tokens\":20}}\n\n\
data: [DONE]\n\n",
        )
            .into_response(),
    }
}

async fn spawn_upstream() -> (SocketAddr, Upstream) {
    let u = Upstream {
        mode: Arc::default(),
        seen: Arc::default(),
    };
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = axum::Router::new()
        .route("/v1/chat/completions", post(completions))
        .with_state(u.clone());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (addr, u)
}

struct Harness {
    base: String,
    upstream: Upstream,
    audit: Arc<MemorySink>,
    state: Arc<GatewayState>,
    router: Router,
    client: reqwest::Client,
}

fn router() -> Router {
    let fx = generate(&FixtureSpec {
        n_clusters: 4,
        n_models: 3,
        n_queries: 200,
        ..Default::default()
    })
    .unwrap();
    let embedder = fx.config.embedding.build().unwrap();
    let out = train(&fx.records, &fx.config, embedder.as_ref(), None, chrono::Utc::now()).unwrap();
    Router::new(out.artifact).unwrap()
}

async fn harness(failover: bool) -> Harness {
    let (addr, upstream) = spawn_upstream().await;
    let router = router();
    std::env::set_var("ARBITER_GATEWAY_TEST_KEY", "sekrit");
    let mut cfg = GatewayConfig {
        failover,
        retry_base_ms: 1,
        ..Default::default()
    };
    for id in router.artifact().registry.ids() {
        cfg.upstreams.insert(
            id.to_string(),
            UpstreamEndpoint {
                base_url: format!("http://{addr}/v1"),
                model: format!("vendor/{id}"),
                api_key_env: Some("ARBITER_GATEWAY_TEST_KEY".into()),
            },
        );
    }
    let audit = Arc::new(MemorySink::new());
    let state = Arc::new(GatewayState::new(Router::new(router.artifact().clone()).unwrap(), &cfg, audit.clone()).unwrap());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let gw = listener.local_addr().unwrap();
    let s = state.clone();
    tokio::spawn(async move { arbiter_gateway::serve(listener, s).await.unwrap() });
    Harness {
        base: format!("http://{gw}"),
        upstream,
        audit,
        state,
        router,
        client: reqwest::Client::new(),
    }
}

fn chat(text: &str) -> Value {
    json!({"model": "auto", "messages": [
        {"role": "system", "content": "terse"},
        {"role": "user", "content": text}
    ]})
}

fn some_query() -> String {
    // Built from one topic's words, so it lands squarely in one cluster.
    let fx = generate(&FixtureSpec {
        n_clusters: 4,
        n_models: 3,
        n_queries: 200,
        ..Default::default()
    })
    .unwrap();
    fx.records[1].query_text.clone()
}

#[tokio::test]
async fn proxies_to_exactly_the_routed_model() {
    let h = harness(false).await;
    let q = some_query();
    let resp = h
        .client
        .post(format!("{}/v1/chat/completions", h.base))
        .json(&chat(&q))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    let routed = resp.headers()[ROUTED_MODEL_HEADER].to_str().unwrap().to_owned();
    let alpha: f64 = resp.headers()[ROUTING_ALPHA_HEADER].to_str().unwrap().parse().unwrap();
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["choices"][0]["message"]["content"], "hi");

    let expected = h.router.route(&q, None).unwrap();
    assert_eq!(routed, expected.chosen.as_str());
    assert_eq!(alpha, expected.alpha_used);

    let seen = h.upstream.seen.lock().unwrap().clone();
    assert_eq!(seen, vec![(format!("vendor/{routed}"), Some("Bearer sekrit".into()))]);

    let records = h.audit.records();
    assert_eq!(records.len(), 1);
    let rec = &records[0];
    assert_eq!(rec.decision, expected);
    assert_eq!(rec.served_model.as_ref().map(ModelId::as_str), Some(routed.as_str()));
    assert_eq!(rec.attempts, 1);
    assert_eq!(rec.query_digest, arbiter_gateway::audit::query_digest(&q));
    let entry = h.router.artifact().registry.get(&expected.chosen).unwrap();
    let cost = 1000.0 * entry.input_price / 1e6 + 500.0 * entry.output_price / 1e6;
    assert!((rec.cost_usd - cost).abs() < 1e-15);
    assert_eq!(h.state.metrics().requests(&expected.chosen), 1);
    assert!((h.state.metrics().cost_usd(&expected.chosen) - cost).abs() < 1e-15);
}

#[tokio::test]
async fn content_parts_and_alpha_header() {
    let h = harness(false).await;
    let q = some_query();
    let body = json!({"model": "x", "messages": [
        {"role": "user", "content": [{"type": "text", "text": q}]}
    ]});
    let resp = h
        .client
        .post(format!("{}/v1/chat/completions", h.base))
        .header(ROUTING_ALPHA_HEADER, "0")
        .json(&body)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    assert_eq!(resp.headers()[ROUTING_ALPHA_HEADER], "0");
    // Cheapest model under alpha = 0 is model-0 in every cluster.
    assert_eq!(resp.headers()[ROUTED_MODEL_HEADER], "model-0");

    let bad = h
        .client
        .post(format!("{}/v1/chat/completions", h.base))
        .header(ROUTING_ALPHA_HEADER, "2")
        .json(&body)
        .send()
        .await
        .unwrap();
    assert_eq!(bad.status(), 400);
    assert_eq!(h.upstream.seen.lock().unwrap().len(), 1);
}

#[tokio::test]
async fn dry_run_route_calls_no_upstream() {
    let h = harness(false).await;
    let q = some_query();
    let resp = h
        .client
        .post(format!("{}/v1/route", h.base))
        .json(&json!({"query": q, "alpha": 1.0, "top_p": 2}))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    let d: RoutingDecision = resp.json().await.unwrap();
    let cfg = arbiter_core::TradeoffConfig::new(1.0, 2).unwrap();
    assert_eq!(d, h.router.route(&q, Some(cfg)).unwrap());
    assert_eq!(d.nearest_clusters.len(), 2);
    assert!(h.upstream.seen.lock().unwrap().is_empty());
    assert!(h.audit.records().is_empty());

    let bad = h
        .client
        .post(format!("{}/v1/route", h.base))
        .json(&json!({"query": q, "top_p": 99}))
        .send()
        .await
        .unwrap();
    assert_eq!(bad.status(), 400);
}

#[tokio::test]
async fn exhausted_retries_give_502_with_decision() {
    let h = harness(false).await;
    let q = some_query();
    let expected = h.router.route(&q, None).unwrap();
    h.upstream
        .mode
        .lock()
        .unwrap()
        .insert(format!("vendor/{}", expected.chosen), Mode::Fail);
    let resp = h
        .client
        .post(format!("{}/v1/chat/completions", h.base))
        .json(&chat(&q))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 502);
    let body: Value = resp.json().await.unwrap();
    let d: RoutingDecision = serde_json::from_value(body["routing_decision"].clone()).unwrap();
    assert_eq!(d, expected);
    assert_eq!(body["error"]["type"], "upstream_error");
    let seen = h.upstream.seen.lock().unwrap().clone();
    assert_eq!(seen.len(), 3);
    assert!(seen.iter().all(|(m, _)| *m == format!("vendor/{}", expected.chosen)));
    let rec = &h.audit.records()[0];
    assert_eq!(rec.served_model, None);
    assert_eq!(rec.attempts, 3);
    assert_eq!(rec.upstream_status, Some(500));
}

#[tokio::test]
async fn failover_moves_to_the_next_ranked_model() {
    let h = harness(true).await;
    let q = some_query();
    let expected = h.router.route(&q, None).unwrap();
    let ranked = expected.ranked();
    h.upstream
        .mode
        .lock()
        .unwrap()
        .insert(format!("vendor/{}", ranked[0]), Mode::Fail);
    let resp = h
        .client
        .post(format!("{}/v1/chat/completions", h.base))
        .json(&chat(&q))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    assert_eq!(resp.headers()[ROUTED_MODEL_HEADER], ranked[1].as_str());
    let rec = &h.audit.records()[0];
    assert_eq!(rec.served_model.as_ref(), Some(&ranked[1]));
    assert_eq!(rec.attempts, 4);
}

#[tokio::test]
async fn streamed_usage_is_costed() {
    let h = harness(false).await;
    let q = some_query();
    let expected = h.router.route(&q, None).unwrap();
    h.upstream
        .mode
        .lock()
        .unwrap()
        .insert(format!("vendor/{}", expected.chosen), Mode::Sse);
    let mut body = chat(&q);
    body["stream"] = json!(true);
    let resp = h
        .client
        .post(format!("{}/v1/chat/completions", h.base))
        .json(&body)
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 200);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    assert!(resp.text().await.unwrap().contains("[DONE]"));
    let rec = &h.audit.records()[0];
    let usage = rec.usage.unwrap();
    assert_eq!((usage.prompt_tokens, usage.completion_tokens), (10, 20));
}

#[tokio::test]
async fn rejects_requests_without_user_text() {
    let h = harness(false).await;
    for body in [json!({"messages": []}), json!({"messages": [{"role": "assistant", "content": "x"}]}), json!([1])] {
        let resp = h
            .client
            .post(format!("{}/v1/chat/completions", h.base))
            .json(&body)
            .send()
            .await
            .unwrap();
        assert_eq!(resp.status(), 400);
    }
    assert!(h.upstream.seen.lock().unwrap().is_empty());
}

#[tokio::test]
async fn health_and_metrics() {
    let h = harness(false).await;
    let q = some_query();
    h.client
        .post(format!("{}/v1/chat/completions", h.base))
        .json(&chat(&q))
        .send()
        .await
        .unwrap();
    let health: Value = h
        .client
        .get(format!("{}/healthz", h.base))
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["artifact_digest"], h.router.artifact().content_digest);
    let text = h
        .client
        .get(format!("{}/metrics", h.base))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    let chosen = h.router.route(&q, None).unwrap().chosen;
    assert!(text.contains(&format!("arbiter_requests_total{{model=\"{chosen}\"}} 1")), "{text}");
    assert!(text.contains("arbiter_route_latency_ms{quantile=\"0.5\"}"));
}

#[test]
fn missing_credentials_fail_at_startup() {
    let router = router();
    let mut cfg = GatewayConfig::default();
    for id in router.artifact().registry.ids() {
        cfg.upstreams.insert(
            id.to_string(),
            UpstreamEndpoint {
                base_url: "http://127.0.0.1:9/v1".into(),
                model: id.to_string(),
                api_key_env: Some("ARBITER_GATEWAY_TEST_KEY_NEVER_SET".into()),
            },
        );
    }
    let err = GatewayState::new(router, &cfg, Arc::new(MemorySink::new())).err().unwrap();
    assert!(err.to_string().contains("ARBITER_GATEWAY_TEST_KEY_NEVER_SET"));

    // Fixture models carry no upstream of their own.
    let err = GatewayState::new(self::router(), &GatewayConfig::default(), Arc::new(MemorySink::new()))
        .err()
        .unwrap();
    assert!(err.to_string().contains("no upstream"));
}
