use std::collections::BTreeSet;

use proptest::prelude::*;
use qfaas_core::auth::Role;
use qfaas_core::circuit::CircuitStats;
use qfaas_core::providers::{BackendInfo, BackendKind, ProviderCatalog};
use qfaas_core::selector::{eligible, rejections, select, SelectError, SelectionCriteria};

const PROVIDERS: [&str; 3] = ["local", "mock-ibm", "mock-braket"];

fn arb_backend(i: usize) -> impl Strategy<Value = BackendInfo> {
    (
        prop::sample::select(PROVIDERS.to_vec()),
        any::<bool>(),
        1usize..24,
        prop::bool::weighted(0.85),
        0u64..6,
        prop::sample::select(vec![0.0, 0.5, 1.0, 1.5, 2.0, 5.0]),
        prop::collection::btree_set(prop::sample::select(Role::ALL.to_vec()), 0..=3),
    )
        .prop_map(move |(provider, qpu, qubits, operational, queue, avg, roles)| BackendInfo {
            name: format!("b{i:02}"),
            provider: provider.into(),
            kind: if qpu { BackendKind::Qpu } else { BackendKind::Simulator },
            qubits,
            operational,
            queue_length: queue,
            avg_seconds_per_job: avg,
            readout_flip_p: 0.0,
            allowed_roles: roles,
        })
}

fn arb_catalog() -> impl Strategy<Value = ProviderCatalog> {
    (0usize..8).prop_flat_map(|n| {
        (0..n)
            .map(arb_backend)
            .collect::<Vec<_>>()
            .prop_map(|bs| ProviderCatalog::new(bs).unwrap())
    })
}

fn arb_criteria() -> impl Strategy<Value = SelectionCriteria> {
    (
        prop::option::weighted(0.3, prop::sample::select(PROVIDERS.to_vec())),
        prop::option::weighted(0.3, prop::sample::select(vec![BackendKind::Qpu, BackendKind::Simulator])),
    )
        .prop_map(|(provider, kind)| SelectionCriteria {
            provider: provider.map(str::to_string),
            backend_type: kind,
            backend_name: None,
            auto_select: true,
        })
}

fn stats(width: usize) -> CircuitStats {
    CircuitStats {
        width,
        gate_count: 0,
        two_qubit_count: 0,
        depth: 0,
    }
}

/// Independent eligibility predicate written from the contract.
fn oracle_eligible(b: &BackendInfo, role: Role, width: usize, c: &SelectionCriteria) -> bool {
    b.operational
        && b.allowed_roles.contains(&role)
        && b.qubits >= width
        && c.backend_type.is_none_or(|k| k == b.kind)
        && c.provider.as_ref().is_none_or(|p| *p == b.provider)
        && c.backend_name.as_ref().is_none_or(|n| *n == b.name)
}

/// Enumerate the eligible set and fully sort by (wait, qubits, name).
fn oracle_pick(cat: &ProviderCatalog, role: Role, width: usize, c: &SelectionCriteria) -> Option<String> {
    let mut pool: Vec<(f64, usize, String)> = cat
        .backends
        .iter()
        .filter(|b| oracle_eligible(b, role, width, c))
        .map(|b| (b.queue_length as f64 * b.avg_seconds_per_job, b.qubits, b.name.clone()))
        .collect();
    pool.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pool.into_iter().next().map(|(_, _, n)| n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn select_matches_brute_force(
        cat in arb_catalog(),
        crit in arb_criteria(),
        role in prop::sample::select(Role::ALL.to_vec()),
        width in 1usize..24,
    ) {
        let s = stats(width);
        let expected: BTreeSet<String> = cat
            .backends
            .iter()
            .filter(|b| oracle_eligible(b, role, width, &crit))
            .map(|b| b.name.clone())
            .collect();
        let got: BTreeSet<String> = eligible(&cat, role, &s, &crit).into_iter().map(|b| b.name).collect();
        prop_assert_eq!(&got, &expected);

        let decision = select(&cat, role, &s, &crit);
        match (oracle_pick(&cat, role, width, &crit), &decision) {
            (Some(want), Ok(d)) => {
                prop_assert_eq!(&d.backend.name, &want);
                prop_assert!(oracle_eligible(&d.backend, role, width, &crit));
                prop_assert!(rejections(&d.backend, role, &s, &crit).is_empty());
                prop_assert_eq!(d.estimated_wait_seconds, d.backend.queue_length as f64 * d.backend.avg_seconds_per_job);
            }
            (None, Err(SelectError::NoEligibleBackend(reasons))) => {
                // Every backend is rejected for at least one reason.
                for b in &cat.backends {
                    prop_assert!(reasons.iter().any(|r| r.backend == b.name));
                }
            }
            (want, got) => prop_assert!(false, "oracle {:?} vs select {:?}", want, got),
        }
        prop_assert_eq!(select(&cat, role, &s, &crit), decision);
    }

    #[test]
    fn uniform_rescaling_keeps_the_winner(
        cat in arb_catalog(),
        crit in arb_criteria(),
        width in 1usize..24,
        exp in -4i32..5,
    ) {
        let s = stats(width);
        let before = select(&cat, Role::Admin, &s, &crit).ok().map(|d| d.backend.name);
        let k = 2f64.powi(exp);
        let scaled = ProviderCatalog::new(
            cat.backends
                .iter()
                .cloned()
                .map(|mut b| {
                    b.avg_seconds_per_job *= k;
                    b
                })
                .collect(),
        )
        .unwrap();
        let after = select(&scaled, Role::Admin, &s, &crit).ok().map(|d| d.backend.name);
        prop_assert_eq!(before, after);
    }
}

#[test]
fn worked_examples() {
    let mk = |name: &str, qubits, queue, avg| BackendInfo {
        name: name.into(),
        provider: "p".into(),
        kind: BackendKind::Qpu,
        qubits,
        operational: true,
        queue_length: queue,
        avg_seconds_per_job: avg,
        readout_flip_p: 0.0,
        allowed_roles: Role::ALL.into_iter().collect(),
    };
    let auto = SelectionCriteria::auto();

    let cat = ProviderCatalog::new(vec![mk("a", 5, 10, 5.0), mk("b", 5, 0, 5.0)]).unwrap();
    assert_eq!(oracle_pick(&cat, Role::Enduser, 1, &auto).as_deref(), Some("b"));
    assert_eq!(select(&cat, Role::Enduser, &stats(1), &auto).unwrap().backend.name, "b");

    let cat = ProviderCatalog::new(vec![mk("a", 5, 0, 1.0), mk("b", 20, 0, 1.0)]).unwrap();
    assert_eq!(oracle_pick(&cat, Role::Enduser, 3, &auto).as_deref(), Some("a"));
    assert_eq!(select(&cat, Role::Enduser, &stats(3), &auto).unwrap().backend.name, "a");

    let cat = ProviderCatalog::new(vec![mk("only", 5, 3, 2.0)]).unwrap();
    assert_eq!(select(&cat, Role::Enduser, &stats(2), &auto).unwrap().backend.name, "only");
}
