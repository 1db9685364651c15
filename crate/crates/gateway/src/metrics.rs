//! Counters exposed at `/metrics` in Prometheus text format.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use arbiter_core::ModelId;

const LATENCY_WINDOW: usize = 4096;
const QUANTILES: [f64; 3] = [0.5, 0.9, 0.99];

#[derive(Default)]
struct ModelCounters {
    requests: AtomicU64,
    failures: AtomicU64,
    /// f64 bits.
    cost_usd: AtomicU64,
}

pub struct Metrics {
    models: BTreeMap<ModelId, ModelCounters>,
    route_errors: AtomicU64,
    route_latency_ms: Mutex<VecDeque<f64>>,
}

impl Metrics {
    pub fn new<'a>(models: impl IntoIterator<Item = &'a ModelId>) -> Self {
        Self {
            models: models
                .into_iter()
                .map(|m| (m.clone(), ModelCounters::default()))
                .collect(),
            route_errors: AtomicU64::new(0),
            route_latency_ms: Mutex::new(VecDeque::with_capacity(LATENCY_WINDOW)),
        }
    }

    pub fn record_served(&self, model: &ModelId, cost_usd: f64) {
        if let Some(c) = self.models.get(model) {
            c.requests.fetch_add(1, Ordering::Relaxed);
            let _ = c.cost_usd.fetch_update(Ordering::Relaxed, Ordering::Relaxed, |bits| {
                Some((f64::from_bits(bits) + cost_usd).to_bits())
            });
        }
    }

    pub fn record_upstream_failure(&self, model: &ModelId) {
        if let Some(c) = self.models.get(model) {
            c.failures.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn record_route_error(&self) {
        self.route_errors.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_route_latency(&self, ms: f64) {
        let mut w = self.route_latency_ms.lock().unwrap_or_else(|p| p.into_inner());
        if w.len() == LATENCY_WINDOW {
            w.pop_front();
        }
        w.push_back(ms);
    }

    pub fn requests(&self, model: &ModelId) -> u64 {
        self.models
            .get(model)
            .map_or(0, |c| c.requests.load(Ordering::Relaxed))
    }

    pub fn cost_usd(&self, model: &ModelId) -> f64 {
        self.models
            .get(model)
            .map_or(0.0, |c| f64::from_bits(c.cost_usd.load(Ordering::Relaxed)))
    }

    /// Nearest-rank quantiles over the most recent routing latencies.
    pub fn latency_quantiles(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<f64> = self
            .route_latency_ms
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .iter()
            .copied()
            .collect();
        if v.is_empty() {
            return Vec::new();
        }
        v.sort_by(f64::total_cmp);
        QUANTILES
            .iter()
            .map(|&q| {
                let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
                (q, v[rank - 1])
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("# HELP arbiter_requests_total Proxied requests served, by model.\n");
        s.push_str("# TYPE arbiter_requests_total counter\n");
        for (m, c) in &self.models {
            let _ = writeln!(
                s,
                "arbiter_requests_total{{model=\"{m}\"}} {}",
                c.requests.load(Ordering::Relaxed)
            );
        }
        s.push_str("# HELP arbiter_cost_usd_total Upstream cost in USD, by model.\n");
        s.push_str("# TYPE arbiter_cost_usd_total counter\n");
        for (m, c) in &self.models {
            let _ = writeln!(
                s,
                "arbiter_cost_usd_total{{model=\"{m}\"}} {}",
                f64::from_bits(c.cost_usd.load(Ordering::Relaxed))
            );
        }
        s.push_str("# HELP arbiter_upstream_failures_total Upstream attempts that failed, by model.\n");
        s.push_str("# TYPE arbiter_upstream_failures_total counter\n");
        for (m, c) in &self.models {
            let _ = writeln!(
                s,
                "arbiter_upstream_failures_total{{model=\"{m}\"}} {}",
                c.failures.load(Ordering::Relaxed)
            );
        }
        s.push_str("# TYPE arbiter_route_errors_total counter\n");
        let _ = writeln!(
            s,
            "arbiter_route_errors_total {}",
            self.route_errors.load(Ordering::Relaxed)
        );
        s.push_str("# HELP arbiter_route_latency_ms Routing latency over a sliding window.\n");
        s.push_str("# TYPE arbiter_route_latency_ms summary\n");
        for (q, v) in self.latency_quantiles() {
            let _ = writeln!(s, "arbiter_route_latency_ms{{quantile=\"{q}\"}} {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_renders() {
        let a = ModelId::new("a").unwrap();
        let m = Metrics::new([&a]);
        m.record_served(&a, 0.25);
        m.record_served(&a, 0.5);
        m.record_served(&ModelId::new("zzz").unwrap(), 1.0);
        assert_eq!(m.requests(&a), 2);
        assert!((m.cost_usd(&a) - 0.75).abs() < 1e-15);
        for ms in 1..=100 {
            m.record_route_latency(ms as f64);
        }
        assert_eq!(m.latency_quantiles(), vec![(0.5, 50.0), (0.9, 90.0), (0.99, 99.0)]);
        let text = m.render();
        assert!(text.contains("arbiter_requests_total{model=\"a\"} 2"));
        assert!(text.contains("arbiter_route_latency_ms{quantile=\"0.9\"} 90"));
    }
}
