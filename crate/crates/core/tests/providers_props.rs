use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use qfaas_core::auth::Role;
use qfaas_core::circuit::{Circuit, CircuitStats};
use qfaas_core::providers::{
    BackendInfo, BackendKind, HandleObserver, HandleState, ProviderCatalog, ProviderConfig, ProviderError, Providers,
};

fn mock(name: &str, avg: f64) -> BackendInfo {
    BackendInfo {
        name: name.into(),
        provider: "mock-ibm".into(),
        kind: BackendKind::Qpu,
        qubits: 5,
        operational: true,
        queue_length: 0,
        avg_seconds_per_job: avg,
        readout_flip_p: 0.0,
        allowed_roles: Role::ALL.into_iter().collect(),
    }
}

/// Live queue length equals the number of handles not yet finished, checked
/// while submits race with completions.
#[test]
fn queue_length_tracks_unfinished_handles() {
    let p = Arc::new(Providers::new(
        ProviderCatalog::new(vec![mock("m", 0.01)]).unwrap(),
        ProviderConfig {
            max_in_flight: 10_000,
            ..Default::default()
        },
    ));
    let backend = p.snapshot().backends[0].clone();
    let ids: Arc<Mutex<Vec<String>>> = Arc::default();
    let submitters: Vec<_> = (0..6)
        .map(|_| {
            let (p, b, ids) = (Arc::clone(&p), backend.clone(), Arc::clone(&ids));
            thread::spawn(move || {
                for _ in 0..25 {
                    let h = p.submit(&b, &Circuit::bell(), 16, None, None).unwrap();
                    ids.lock().push(h.id);
                    thread::sleep(Duration::from_millis(2));
                }
            })
        })
        .collect();
    let deadline = Instant::now() + Duration::from_secs(60);
    loop {
        // Hold the id list so no submit lands between the two reads below.
        let guard = ids.lock();
        let queue = p.snapshot().backends[0].queue_length;
        let unfinished = guard.iter().filter(|id| !p.poll(id).unwrap().state.is_terminal()).count() as u64;
        // Completions may land between the snapshot and the polls, never
        // the other way round.
        assert!(queue >= unfinished, "queue {queue} < unfinished {unfinished}");
        for (name, counter, actual) in p.queue_audit() {
            assert_eq!(counter, actual, "{name}");
        }
        let done = guard.len() == 150 && unfinished == 0;
        drop(guard);
        if done {
            break;
        }
        assert!(Instant::now() < deadline, "jobs did not drain");
        thread::sleep(Duration::from_millis(3));
    }
    for s in submitters {
        s.join().unwrap();
    }
    assert_eq!(p.snapshot().backends[0].queue_length, 0);
    assert_eq!(p.pending("m"), 0);
}

/// Exact equality when nothing can complete in between.
#[test]
fn queue_length_exact_when_quiescent() {
    let p = Providers::new(ProviderCatalog::new(vec![mock("slow", 60.0)]).unwrap(), ProviderConfig::default());
    let b = p.snapshot().backends[0].clone();
    for n in 1..=5u64 {
        p.submit(&b, &Circuit::bell(), 1, None, None).unwrap();
        // The first handle had nothing ahead of it and may already be done.
        let unfinished = n - u64::from(p.snapshot().backends[0].queue_length < n);
        assert_eq!(p.snapshot().backends[0].queue_length, unfinished);
    }
}

#[test]
fn never_done_before_its_delay() {
    let p = Providers::new(ProviderCatalog::new(vec![mock("m", 0.4)]).unwrap(), ProviderConfig::default());
    let b = p.snapshot().backends[0].clone();
    let tick = ProviderConfig::default().tick;
    let started: Arc<Mutex<Vec<(String, Instant)>>> = Arc::default();
    let sink = Arc::clone(&started);
    let observer: HandleObserver = Arc::new(move |h| {
        if h.state == HandleState::Done {
            sink.lock().push((h.id.clone(), Instant::now()));
        }
    });
    let mut expected = Vec::new();
    for _ in 0..5 {
        let t0 = Instant::now();
        let h = p.submit(&b, &Circuit::bell(), 8, None, Some(Arc::clone(&observer))).unwrap();
        let delay = (h.ready_at - h.submitted_at).to_std().unwrap();
        expected.push((h.id, t0, delay));
    }
    let deadline = Instant::now() + Duration::from_secs(20);
    while started.lock().len() < expected.len() {
        assert!(Instant::now() < deadline);
        thread::sleep(Duration::from_millis(20));
    }
    let done = started.lock();
    for (id, t0, delay) in expected {
        let (_, at) = done.iter().find(|(d, _)| *d == id).unwrap();
        assert!(at.duration_since(t0) + tick >= delay, "{id} finished early");
    }
}

#[test]
fn readout_noise_applies_on_mock_qpu() {
    let mut noisy = mock("noisy", 0.0);
    noisy.readout_flip_p = 1.0;
    let p = Providers::new(ProviderCatalog::new(vec![noisy]).unwrap(), ProviderConfig::default());
    let b = p.snapshot().backends[0].clone();
    let mut c = Circuit::new(1);
    c.measure_all();
    let h = p.submit(&b, &c, 50, Some(1), None).unwrap();
    let deadline = Instant::now() + Duration::from_secs(5);
    let done = loop {
        let s = p.poll(&h.id).unwrap();
        if s.state.is_terminal() || Instant::now() > deadline {
            break s;
        }
        thread::sleep(Duration::from_millis(10));
    };
    assert_eq!(done.result.unwrap().counts.get("1"), Some(&50));
}

#[test]
fn verify_has_no_side_effects() {
    let p = Providers::new(ProviderCatalog::default_catalog(), ProviderConfig::default());
    let before = p.snapshot();
    let s = CircuitStats {
        width: 2,
        gate_count: 2,
        two_qubit_count: 1,
        depth: 2,
    };
    for _ in 0..10 {
        p.verify_backend(Role::Enduser, "mock-ibm-q5", &s).unwrap();
        let _ = p.verify_backend(Role::Enduser, "nope", &s);
    }
    assert_eq!(p.snapshot(), before);
}

#[test]
fn reload_swaps_catalog() {
    let p = Providers::new(ProviderCatalog::default_catalog(), ProviderConfig::default());
    p.reload(ProviderCatalog::new(vec![mock("only", 1.0)]).unwrap());
    let names: Vec<_> = p.snapshot().backends.into_iter().map(|b| b.name).collect();
    assert_eq!(names, ["only"]);
    assert!(matches!(p.set_operational("gone", false), Err(ProviderError::UnknownBackend(_))));
}
