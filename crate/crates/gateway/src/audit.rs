//! One JSON line per proxied request.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use arbiter_core::{ModelId, RoutingDecision};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub timestamp: DateTime<Utc>,
    /// SHA-256 of the routed query text; the text itself is not logged.
    pub query_digest: String,
    pub decision: RoutingDecision,
    /// Model that produced the relayed response; `None` when every attempt failed.
    pub served_model: Option<ModelId>,
    pub upstream_status: Option<u16>,
    pub attempts: u32,
    pub route_latency_ms: f64,
    pub upstream_latency_ms: f64,
    pub usage: Option<Usage>,
    pub cost_usd: f64,
}

pub fn query_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub trait AuditSink: Send + Sync {
    fn record(&self, rec: &AuditRecord);
}

/// Appends JSON lines to any writer.
pub struct JsonLinesSink<W: Write + Send> {
    out: Mutex<W>,
}

impl<W: Write + Send> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        Self { out: Mutex::new(out) }
    }
}

impl JsonLinesSink<std::fs::File> {
    pub fn append_to(path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(OpenOptions::new().create(true).append(true).open(path)?))
    }
}

impl<W: Write + Send> AuditSink for JsonLinesSink<W> {
    fn record(&self, rec: &AuditRecord) {
        let line = match serde_json::to_string(rec) {
            Ok(l) => l,
            Err(e) => {
                tracing::error!(error = %e, "failed to serialize audit record");
                return;
            }
        };
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = writeln!(out, "{line}").and_then(|_| out.flush()) {
            tracing::error!(error = %e, "failed to write audit record");
        }
    }
}

/// Keeps records in memory; handy for tests and embedding the gateway.
#[derive(Default)]
pub struct MemorySink {
    records: Mutex<Vec<AuditRecord>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> Vec<AuditRecord> {
        self.records.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

impl AuditSink for MemorySink {
    fn record(&self, rec: &AuditRecord) {
        self.records
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .push(rec.clone());
    }
}
