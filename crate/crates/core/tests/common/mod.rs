#![allow(dead_code)]

use proptest::prelude::*;
use qfaas_core::circuit::{Circuit, GateKind, GateOp};

pub fn arb_op(width: usize) -> impl Strategy<Value = GateOp> {
    let kinds = proptest::sample::select(GateKind::ALL.to_vec());
    (kinds, 0..width, 0..width, -7.0f64..7.0).prop_filter_map("two-qubit gate needs two qubits", move |(kind, a, b, angle)| {
        match kind.arity() {
            2 if width < 2 => None,
            2 => {
                let b = if a == b { (a + 1) % width } else { b };
                Some(GateOp::two(kind, a, b))
            }
            _ if kind.takes_angle() => Some(GateOp::rotation(kind, angle, a)),
            _ => Some(GateOp::single(kind, a)),
        }
    })
}

/// Valid, executable circuits of width `1..=max_width` with up to `max_ops` gates.
pub fn arb_circuit(max_width: usize, max_ops: usize) -> impl Strategy<Value = Circuit> {
    (1..=max_width).prop_flat_map(move |width| {
        (
            proptest::collection::vec(arb_op(width), 0..=max_ops),
            proptest::collection::btree_set(0..width, 1..=width),
        )
            .prop_map(move |(ops, measured)| Circuit { width, ops, measured })
    })
}
