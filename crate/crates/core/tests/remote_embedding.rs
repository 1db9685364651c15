//! Remote provider against a local stub server.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use arbiter_core::embedding::{EmbeddingProviderConfig, ProviderKind};
use arbiter_core::error::EmbeddingError;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Json;
use serde_json::{json, Value};

#[derive(Clone)]
struct Stub {
    dim: usize,
    /// Status returned for the first `failures` requests.
    fail_with: StatusCode,
    failures: usize,
    hits: Arc<AtomicUsize>,
}

async fn embeddings(State(s): State<Stub>, Json(body): Json<Value>) -> Response {
    let n = s.hits.fetch_add(1, Ordering::SeqCst);
    if n < s.failures {
        return (s.fail_with, "nope").into_response();
    }
    let inputs = body["input"].as_array().unwrap();
    // Reply in reverse order with explicit indices.
    let data: Vec<Value> = inputs
        .iter()
        .enumerate()
        .rev()
        .map(|(i, text)| {
            let mut v = vec![0.0; s.dim];
            v[i % s.dim] = 1.0;
            v[(i + 1) % s.dim] += text.as_str().unwrap().len() as f64 / 100.0;
            json!({"index": i, "embedding": v})
        })
        .collect();
    Json(json!({"data": data})).into_response()
}

fn spawn_stub(stub: Stub) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            let app = axum::Router::new().route("/embeddings", post(embeddings)).with_state(stub);
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn config(addr: SocketAddr, dim: usize, key_var: &str) -> EmbeddingProviderConfig {
    std::env::set_var(key_var, "test-key");
    EmbeddingProviderConfig {
        provider: ProviderKind::RemoteHttp,
        endpoint: Some(format!("http://{addr}/embeddings")),
        dim,
        api_key_env: Some(key_var.into()),
        timeout_ms: 5_000,
        max_batch: 2,
        ..EmbeddingProviderConfig::default()
    }
}

fn stub(dim: usize, fail_with: StatusCode, failures: usize) -> (Stub, Arc<AtomicUsize>) {
    let hits = Arc::new(AtomicUsize::new(0));
    (
        Stub {
            dim,
            fail_with,
            failures,
            hits: hits.clone(),
        },
        hits,
    )
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| "x".repeat(i + 1)).collect()
}

#[test]
fn returns_unit_vectors_in_input_order() {
    let (s, hits) = stub(8, StatusCode::OK, 0);
    let addr = spawn_stub(s);
    let e = config(addr, 8, "ARBITER_TEST_KEY_ORDER").build().unwrap();
    let out = e.embed_batch(&texts(5)).unwrap();
    assert_eq!(out.len(), 5);
    // max_batch = 2 splits five texts into three requests.
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    for (i, v) in out.iter().enumerate() {
        assert_eq!(v.dim(), 8);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        // Chunk-local index i % 2 carries the one-hot component.
        assert!(v.values()[i % 2] > 0.5);
    }
}

#[test]
fn wrong_dimension_is_rejected() {
    let (s, _) = stub(1024, StatusCode::OK, 0);
    let addr = spawn_stub(s);
    let e = config(addr, 4096, "ARBITER_TEST_KEY_DIM").build().unwrap();
    let err = e.embed_batch(&texts(1)).unwrap_err();
    assert!(
        matches!(err, EmbeddingError::DimensionMismatch { expected: 4096, actual: 1024 }),
        "{err:?}"
    );
}

#[test]
fn server_errors_are_retried_then_reported() {
    let (s, hits) = stub(4, StatusCode::SERVICE_UNAVAILABLE, usize::MAX);
    let addr = spawn_stub(s);
    let e = config(addr, 4, "ARBITER_TEST_KEY_5XX").build().unwrap();
    let err = e.embed_batch(&texts(1)).unwrap_err();
    assert!(matches!(err, EmbeddingError::ProviderUnavailable(_)), "{err:?}");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn transient_failure_recovers() {
    let (s, hits) = stub(4, StatusCode::TOO_MANY_REQUESTS, 2);
    let addr = spawn_stub(s);
    let e = config(addr, 4, "ARBITER_TEST_KEY_429").build().unwrap();
    assert_eq!(e.embed_batch(&texts(1)).unwrap().len(), 1);
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[test]
fn unauthorized_is_not_retried() {
    let (s, hits) = stub(4, StatusCode::UNAUTHORIZED, usize::MAX);
    let addr = spawn_stub(s);
    let e = config(addr, 4, "ARBITER_TEST_KEY_401").build().unwrap();
    let err = e.embed_batch(&texts(1)).unwrap_err();
    assert!(matches!(err, EmbeddingError::AuthError(_)), "{err:?}");
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn missing_key_is_an_auth_error() {
    let (s, hits) = stub(4, StatusCode::OK, 0);
    let addr = spawn_stub(s);
    let mut cfg = config(addr, 4, "ARBITER_TEST_KEY_UNUSED");
    cfg.api_key_env = Some("ARBITER_TEST_KEY_DEFINITELY_UNSET".into());
    let err = cfg.build().unwrap().embed_batch(&texts(1)).unwrap_err();
    assert!(matches!(err, EmbeddingError::AuthError(_)), "{err:?}");
    assert_eq!(hits.load(Ordering::SeqCst), 0);
}
