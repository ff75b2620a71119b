//! Monotone counters rendered in the Prometheus text format.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::Mutex;

#[derive(Debug, Default)]
pub struct Metrics {
    pub invocations: AtomicU64,
    pub jobs_completed: AtomicU64,
    pub jobs_failed: AtomicU64,
    http: Mutex<BTreeMap<u16, u64>>,
}

impl Metrics {
    pub fn record_http(&self, code: u16) {
        *self.http.lock().entry(code).or_default() += 1;
    }

    pub fn http_count(&self, code: u16) -> u64 {
        self.http.lock().get(&code).copied().unwrap_or(0)
    }

    /// `queue_depth` is the live queue length per backend.
    pub fn render(&self, queue_depth: &[(String, u64)]) -> String {
        let mut out = String::new();
        let counter = |out: &mut String, name: &str, help: &str, v: u64| {
            let _ = writeln!(out, "# HELP {name} {help}\n# TYPE {name} counter\n{name} {v}");
        };
        counter(
            &mut out,
            "invocations_total",
            "Function invocations accepted.",
            self.invocations.load(Ordering::Relaxed),
        );
        counter(
            &mut out,
            "jobs_completed_total",
            "Jobs that reached Completed.",
            self.jobs_completed.load(Ordering::Relaxed),
        );
        counter(
            &mut out,
            "jobs_failed_total",
            "Jobs that reached Failed.",
            self.jobs_failed.load(Ordering::Relaxed),
        );
        out.push_str("# HELP queue_depth Jobs waiting or running per backend.\n# TYPE queue_depth gauge\n");
        for (backend, depth) in queue_depth {
            let _ = writeln!(out, "queue_depth{{backend=\"{backend}\"}} {depth}");
        }
        out.push_str("# HELP http_requests_total HTTP responses by status code.\n# TYPE http_requests_total counter\n");
        for (code, n) in self.http.lock().iter() {
            let _ = writeln!(out, "http_requests_total{{code=\"{code}\"}} {n}");
        }
        out
    }
}

/// Reads `name` or `name{labels}` from rendered text.
pub fn read_sample(text: &str, series: &str) -> Option<f64> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .find_map(|l| l.strip_prefix(series)?.strip_prefix(' ')?.trim().parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_counters_are_zero() {
        let m = Metrics::default();
        let text = m.render(&[("local-sv".into(), 0)]);
        assert_eq!(read_sample(&text, "invocations_total"), Some(0.0));
        assert_eq!(read_sample(&text, "jobs_failed_total"), Some(0.0));
        assert_eq!(read_sample(&text, "queue_depth{backend=\"local-sv\"}"), Some(0.0));
    }

    #[test]
    fn http_codes() {
        let m = Metrics::default();
        m.record_http(200);
        m.record_http(200);
        m.record_http(401);
        let text = m.render(&[]);
        assert_eq!(read_sample(&text, "http_requests_total{code=\"200\"}"), Some(2.0));
        assert_eq!(m.http_count(401), 1);
    }
}
