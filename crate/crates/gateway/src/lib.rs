//! OpenAI-compatible HTTP gateway.
//!
//! `POST /v1/chat/completions` routes on the latest user message, rewrites the
//! `model` field to the chosen upstream model and relays the response with
//! `x-routed-model` and `x-routing-alpha` headers. `POST /v1/route` returns the
//! decision without calling any upstream. `GET /healthz` and `GET /metrics`
//! are for operators.
//!
//! Upstream responses are buffered before being relayed, streamed ones included.

pub mod audit;
pub mod config;
pub mod error;
pub mod metrics;
pub mod server;
pub mod upstream;

pub use audit::{AuditRecord, AuditSink, JsonLinesSink, MemorySink, Usage};
pub use config::GatewayConfig;
pub use error::GatewayError;
pub use server::{app, audit_sink, serve, GatewayState, ROUTED_MODEL_HEADER, ROUTING_ALPHA_HEADER};
