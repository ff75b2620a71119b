//! Quantum backends: the catalog, backend verification and job execution.
//!
//! Every submission becomes a [`ProviderJobHandle`] that stays `queued` until
//! `submitted + queue_length × avg_seconds_per_job` (queue length taken at
//! submit time), then runs on the simulator worker pool with the backend's
//! readout noise. The local simulator has no per-job wait, so its jobs start
//! immediately. A single scheduler thread performs every queued→running
//! transition; it wakes on each submission and at least once per tick.

mod catalog;

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use parking_lot::{Condvar, Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auth::Role;
use crate::circuit::{Circuit, CircuitError, CircuitStats};
use crate::simulator::{self, ExecutionResult, DEFAULT_MAX_QUBITS};

pub use catalog::{BackendFilter, BackendInfo, BackendKind, ProviderCatalog};

pub const DEFAULT_TICK: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("invalid catalog: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum VerifyError {
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("backend `{0}` is not operational")]
    BackendDown(String),
    #[error("role `{role}` may not use backend `{backend}`")]
    PermissionDenied { backend: String, role: Role },
    #[error("backend `{backend}` has {available} qubits, circuit needs {required}")]
    InsufficientQubits {
        backend: String,
        available: usize,
        required: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("provider `{provider}` is at its limit of {limit} in-flight jobs")]
    CapacityExceeded { provider: String, limit: usize },
    #[error("unknown job handle `{0}`")]
    UnknownHandle(String),
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("shots must be at least 1")]
    InvalidShots,
    #[error(transparent)]
    InvalidCircuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandleState {
    Queued,
    Running,
    Done,
    Failed,
}

impl HandleState {
    pub fn is_terminal(self) -> bool {
        matches!(self, HandleState::Done | HandleState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderJobHandle {
    pub id: String,
    pub backend_name: String,
    pub provider: String,
    pub state: HandleState,
    pub shots: u64,
    pub seed: u64,
    pub submitted_at: DateTime<Utc>,
    pub ready_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
    /// Present iff `state` is `done`.
    pub result: Option<ExecutionResult>,
    pub error: Option<String>,
}

/// Called after a handle moves to `running` and again when it finishes.
pub type HandleObserver = Arc<dyn Fn(&ProviderJobHandle) + Send + Sync>;

#[derive(Debug, Clone)]
pub struct ProviderConfig {
    pub tick: Duration,
    pub workers: usize,
    /// Per provider, counting queued and running handles.
    pub max_in_flight: usize,
    pub max_qubits: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            tick: DEFAULT_TICK,
            workers: thread::available_parallelism().map_or(2, |n| n.get()).clamp(2, 8),
            max_in_flight: 64,
            max_qubits: DEFAULT_MAX_QUBITS,
        }
    }
}

struct Entry {
    handle: ProviderJobHandle,
    ready: Instant,
    circuit: Arc<Circuit>,
    readout_flip_p: f64,
    observer: Option<HandleObserver>,
}

#[derive(Default)]
struct State {
    entries: HashMap<String, Entry>,
    /// Non-terminal handles per backend.
    pending: HashMap<String, u64>,
    /// Non-terminal handles per provider.
    in_flight: HashMap<String, usize>,
}

struct Inner {
    catalog: RwLock<Arc<ProviderCatalog>>,
    state: Mutex<State>,
    wake: Condvar,
    shutdown: AtomicBool,
    pool: rayon::ThreadPool,
    config: ProviderConfig,
}

/// The provider layer. Dropping it stops the scheduler thread.
pub struct Providers {
    inner: Arc<Inner>,
}

impl Providers {
    pub fn new(catalog: ProviderCatalog, config: ProviderConfig) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers.max(1))
            .thread_name(|i| format!("qfaas-sim-{i}"))
            .build()
            .expect("simulator worker pool");
        let inner = Arc::new(Inner {
            catalog: RwLock::new(Arc::new(catalog)),
            state: Mutex::new(State::default()),
            wake: Condvar::new(),
            shutdown: AtomicBool::new(false),
            pool,
            config,
        });
        let sched = Arc::clone(&inner);
        thread::Builder::new()
            .name("qfaas-scheduler".into())
            .spawn(move || scheduler_loop(sched))
            .expect("scheduler thread");
        Self { inner }
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.inner.config
    }

    /// Atomically replaces the catalog. In-flight handles keep running.
    pub fn reload(&self, catalog: ProviderCatalog) {
        *self.inner.catalog.write() = Arc::new(catalog);
    }

    /// Sets a backend's operational flag in the live catalog.
    pub fn set_operational(&self, name: &str, operational: bool) -> Result<(), ProviderError> {
        let mut guard = self.inner.catalog.write();
        let mut next = (**guard).clone();
        let b = next
            .backends
            .iter_mut()
            .find(|b| b.name == name)
            .ok_or_else(|| ProviderError::UnknownBackend(name.to_string()))?;
        b.operational = operational;
        *guard = Arc::new(next);
        Ok(())
    }

    /// Catalog with live queue lengths (standing load plus our pending jobs).
    pub fn snapshot(&self) -> ProviderCatalog {
        let catalog = Arc::clone(&self.inner.catalog.read());
        let state = self.inner.state.lock();
        let mut snap = (*catalog).clone();
        for b in &mut snap.backends {
            b.queue_length += state.pending.get(&b.name).copied().unwrap_or(0);
        }
        snap
    }

    pub fn list_backends(&self, filter: &BackendFilter) -> Vec<BackendInfo> {
        self.snapshot()
            .backends
            .into_iter()
            .filter(|b| filter.matches(b))
            .collect()
    }

    pub fn verify_backend(
        &self,
        role: Role,
        name: &str,
        stats: &CircuitStats,
    ) -> Result<BackendInfo, VerifyError> {
        self.snapshot().verify(role, name, stats)
    }

    pub fn submit(
        &self,
        backend: &BackendInfo,
        circuit: &Circuit,
        shots: u64,
        seed: Option<u64>,
        observer: Option<HandleObserver>,
    ) -> Result<ProviderJobHandle, ProviderError> {
        if shots == 0 {
            return Err(ProviderError::InvalidShots);
        }
        circuit.validate_executable().into_result()?;
        let catalog = Arc::clone(&self.inner.catalog.read());
        let live = catalog
            .get(&backend.name)
            .ok_or_else(|| ProviderError::UnknownBackend(backend.name.clone()))?;

        let mut state = self.inner.state.lock();
        let in_flight = state.in_flight.get(&live.provider).copied().unwrap_or(0);
        if in_flight >= self.inner.config.max_in_flight {
            return Err(ProviderError::CapacityExceeded {
                provider: live.provider.clone(),
                limit: self.inner.config.max_in_flight,
            });
        }
        let ahead = live.queue_length + state.pending.get(&live.name).copied().unwrap_or(0);
        let delay = Duration::from_secs_f64(ahead as f64 * live.avg_seconds_per_job);
        let now = Utc::now();
        let handle = ProviderJobHandle {
            id: uuid::Uuid::new_v4().to_string(),
            backend_name: live.name.clone(),
            provider: live.provider.clone(),
            state: HandleState::Queued,
            shots,
            seed: seed.unwrap_or_else(rand::random),
            submitted_at: now,
            ready_at: now + chrono::Duration::from_std(delay).unwrap_or_default(),
            started_at: None,
            finished_at: None,
            result: None,
            error: None,
        };
        *state.pending.entry(live.name.clone()).or_default() += 1;
        *state.in_flight.entry(live.provider.clone()).or_default() += 1;
        state.entries.insert(
            handle.id.clone(),
            Entry {
                handle: handle.clone(),
                ready: Instant::now() + delay,
                circuit: Arc::new(circuit.clone()),
                readout_flip_p: live.readout_flip_p,
                observer,
            },
        );
        drop(state);
        self.inner.wake.notify_all();
        Ok(handle)
    }

    pub fn poll(&self, handle_id: &str) -> Result<ProviderJobHandle, ProviderError> {
        self.inner
            .state
            .lock()
            .entries
            .get(handle_id)
            .map(|e| e.handle.clone())
            .ok_or_else(|| ProviderError::UnknownHandle(handle_id.to_string()))
    }

    /// Per backend: the queue counter and a fresh count of unfinished
    /// handles, both read under one lock.
    pub fn queue_audit(&self) -> Vec<(String, u64, u64)> {
        let state = self.inner.state.lock();
        let mut actual: HashMap<&str, u64> = HashMap::new();
        for e in state.entries.values() {
            if !e.handle.state.is_terminal() {
                *actual.entry(e.handle.backend_name.as_str()).or_default() += 1;
            }
        }
        let mut names: Vec<&String> = state.pending.keys().collect();
        names.sort();
        names
            .into_iter()
            .map(|n| (n.clone(), state.pending[n], actual.get(n.as_str()).copied().unwrap_or(0)))
            .collect()
    }

    /// Number of non-terminal handles on `backend`.
    pub fn pending(&self, backend: &str) -> u64 {
        self.inner.state.lock().pending.get(backend).copied().unwrap_or(0)
    }
}

impl Drop for Providers {
    fn drop(&mut self) {
        self.inner.shutdown.store(true, Ordering::SeqCst);
        self.inner.wake.notify_all();
    }
}

struct Dispatch {
    handle: ProviderJobHandle,
    circuit: Arc<Circuit>,
    readout_flip_p: f64,
    observer: Option<HandleObserver>,
}

fn scheduler_loop(inner: Arc<Inner>) {
    let mut state = inner.state.lock();
    loop {
        if inner.shutdown.load(Ordering::SeqCst) {
            return;
        }
        let now = Instant::now();
        let mut ready = Vec::new();
        let mut next_deadline: Option<Instant> = None;
        for entry in state.entries.values_mut() {
            if entry.handle.state != HandleState::Queued {
                continue;
            }
            if entry.ready <= now {
                entry.handle.state = HandleState::Running;
                entry.handle.started_at = Some(Utc::now());
                ready.push(Dispatch {
                    handle: entry.handle.clone(),
                    circuit: Arc::clone(&entry.circuit),
                    readout_flip_p: entry.readout_flip_p,
                    observer: entry.observer.clone(),
                });
            } else {
                next_deadline = Some(next_deadline.map_or(entry.ready, |d| d.min(entry.ready)));
            }
        }
        if !ready.is_empty() {
            drop(state);
            for job in ready {
                if let Some(obs) = &job.observer {
                    obs(&job.handle);
                }
                let worker = Arc::clone(&inner);
                inner.pool.spawn(move || execute(worker, job));
            }
            state = inner.state.lock();
            continue;
        }
        let wait = next_deadline
            .map(|d| d.saturating_duration_since(now).min(inner.config.tick))
            .unwrap_or(inner.config.tick);
        inner.wake.wait_for(&mut state, wait);
    }
}

fn execute(inner: Arc<Inner>, job: Dispatch) {
    let outcome = simulator::execute(
        &job.circuit,
        job.handle.shots,
        job.handle.seed,
        job.readout_flip_p,
        inner.config.max_qubits,
        &job.handle.backend_name,
    );
    let snapshot = {
        let mut state = inner.state.lock();
        let Some(entry) = state.entries.get_mut(&job.handle.id) else {
            return;
        };
        entry.handle.finished_at = Some(Utc::now());
        match outcome {
            Ok(result) => {
                entry.handle.state = HandleState::Done;
                entry.handle.result = Some(result);
            }
            Err(e) => {
                entry.handle.state = HandleState::Failed;
                entry.handle.error = Some(e.to_string());
            }
        }
        let snapshot = entry.handle.clone();
        if let Some(n) = state.pending.get_mut(&snapshot.backend_name) {
            *n = n.saturating_sub(1);
        }
        if let Some(n) = state.in_flight.get_mut(&snapshot.provider) {
            *n = n.saturating_sub(1);
        }
        snapshot
    };
    inner.wake.notify_all();
    if let Some(obs) = &job.observer {
        obs(&snapshot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mock(name: &str, base_queue: u64, avg: f64) -> BackendInfo {
        BackendInfo {
            name: name.into(),
            provider: "mock".into(),
            kind: BackendKind::Qpu,
            qubits: 5,
            operational: true,
            queue_length: base_queue,
            avg_seconds_per_job: avg,
            readout_flip_p: 0.0,
            allowed_roles: Role::ALL.into_iter().collect(),
        }
    }

    fn wait_terminal(p: &Providers, id: &str, limit: Duration) -> ProviderJobHandle {
        let start = Instant::now();
        loop {
            let h = p.poll(id).unwrap();
            if h.state.is_terminal() || start.elapsed() > limit {
                return h;
            }
            thread::sleep(Duration::from_millis(10));
        }
    }

    #[test]
    fn local_job_completes() {
        let p = Providers::new(ProviderCatalog::default_catalog(), ProviderConfig::default());
        let backend = p.snapshot().get("local-sv").unwrap().clone();
        let h = p.submit(&backend, &Circuit::bell(), 100, Some(3), None).unwrap();
        let done = wait_terminal(&p, &h.id, Duration::from_secs(5));
        assert_eq!(done.state, HandleState::Done);
        assert_eq!(done.result.unwrap().counts.values().sum::<u64>(), 100);
        assert_eq!(p.pending("local-sv"), 0);
    }

    #[test]
    fn unknown_handle() {
        let p = Providers::new(ProviderCatalog::default(), ProviderConfig::default());
        assert!(matches!(p.poll("nope"), Err(ProviderError::UnknownHandle(_))));
    }

    #[test]
    fn empty_catalog_lists_nothing() {
        let p = Providers::new(ProviderCatalog::default(), ProviderConfig::default());
        assert!(p.list_backends(&BackendFilter::default()).is_empty());
    }

    #[test]
    fn list_filters() {
        let p = Providers::new(ProviderCatalog::default_catalog(), ProviderConfig::default());
        let sims = p.list_backends(&BackendFilter {
            kind: Some(BackendKind::Simulator),
            ..Default::default()
        });
        assert!(sims.iter().all(|b| b.kind == BackendKind::Simulator));
        assert_eq!(sims.len(), 2);
        p.set_operational("mock-ibm-q5", false).unwrap();
        let up = p.list_backends(&BackendFilter {
            operational: Some(true),
            ..Default::default()
        });
        assert!(up.iter().all(|b| b.name != "mock-ibm-q5"));
    }

    #[test]
    fn queued_until_delay_elapses() {
        let cat = ProviderCatalog::new(vec![mock("slow", 2, 1.5)]).unwrap();
        let p = Providers::new(cat, ProviderConfig::default());
        let backend = p.snapshot().backends[0].clone();
        let start = Instant::now();
        let h = p.submit(&backend, &Circuit::bell(), 10, Some(1), None).unwrap();
        let expected = chrono::Duration::milliseconds(3000);
        assert!(((h.ready_at - h.submitted_at) - expected).num_milliseconds().abs() < 10);
        thread::sleep(Duration::from_millis(500));
        assert_eq!(p.poll(&h.id).unwrap().state, HandleState::Queued);
        assert!(p.poll(&h.id).unwrap().result.is_none());
        let done = wait_terminal(&p, &h.id, Duration::from_secs(6));
        let elapsed = start.elapsed().as_secs_f64();
        assert_eq!(done.state, HandleState::Done);
        assert!((elapsed - 3.0).abs() <= 0.5, "elapsed {elapsed}");
    }

    #[test]
    fn capacity_limit() {
        let cat = ProviderCatalog::new(vec![mock("slow", 0, 30.0)]).unwrap();
        let p = Providers::new(
            cat,
            ProviderConfig {
                max_in_flight: 2,
                ..Default::default()
            },
        );
        let b = p.snapshot().backends[0].clone();
        // First job has nothing ahead of it and starts at once; hold two
        // behind it by submitting quickly.
        p.submit(&b, &Circuit::bell(), 1, None, None).unwrap();
        p.submit(&b, &Circuit::bell(), 1, None, None).unwrap();
        let third = p.submit(&b, &Circuit::bell(), 1, None, None);
        assert!(matches!(third, Err(ProviderError::CapacityExceeded { limit: 2, .. })));
    }

    #[test]
    fn observer_sees_running_then_done() {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let sink = Arc::clone(&seen);
        let observer: HandleObserver = Arc::new(move |h| sink.lock().push(h.state));
        let p = Providers::new(ProviderCatalog::default_catalog(), ProviderConfig::default());
        let b = p.snapshot().get("local-sv").unwrap().clone();
        let h = p.submit(&b, &Circuit::bell(), 5, None, Some(observer)).unwrap();
        wait_terminal(&p, &h.id, Duration::from_secs(5));
        thread::sleep(Duration::from_millis(50));
        assert_eq!(*seen.lock(), vec![HandleState::Running, HandleState::Done]);
    }

    #[test]
    fn too_wide_for_simulator_fails() {
        let mut wide = mock("wide", 0, 0.0);
        wide.qubits = 40;
        let p = Providers::new(
            ProviderCatalog::new(vec![wide]).unwrap(),
            ProviderConfig {
                max_qubits: 3,
                ..Default::default()
            },
        );
        let b = p.snapshot().backends[0].clone();
        let mut c = Circuit::new(4);
        c.measure_all();
        let h = p.submit(&b, &c, 1, None, None).unwrap();
        let done = wait_terminal(&p, &h.id, Duration::from_secs(5));
        assert_eq!(done.state, HandleState::Failed);
        assert!(done.error.unwrap().contains("capped"));
    }

    #[test]
    fn rejects_unmeasured_circuit_and_zero_shots() {
        let p = Providers::new(ProviderCatalog::default_catalog(), ProviderConfig::default());
        let b = p.snapshot().get("local-sv").unwrap().clone();
        assert!(matches!(
            p.submit(&b, &Circuit::new(1), 1, None, None),
            Err(ProviderError::InvalidCircuit(_))
        ));
        assert!(matches!(
            p.submit(&b, &Circuit::bell(), 0, None, None),
            Err(ProviderError::InvalidShots)
        ));
    }
}
