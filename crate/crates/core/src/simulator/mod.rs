//! Statevector simulator.
//!
//! Basis index convention: `b = Σ_q bit(q)·2^q`, qubit 0 least significant.
//! Outcome bitstrings put the highest measured qubit leftmost, so an outcome
//! read as a binary number is its index over the measured qubits.

mod sampling;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, GateKind, GateOp};

pub use sampling::{sample, Distribution};

/// Outcome bitstring to number of shots observed.
pub type Counts = BTreeMap<String, u64>;

/// Default register cap; a 24-qubit state is 256 MiB of amplitudes.
pub const DEFAULT_MAX_QUBITS: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    InvalidCircuit(#[from] CircuitError),
    #[error("circuit needs {width} qubits but the simulator is capped at {max}")]
    TooManyQubits { width: usize, max: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub counts: Counts,
    pub shots: u64,
    pub seed: u64,
    pub duration_ms: u64,
    pub backend_name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn single_qubit_matrix(kind: GateKind, angle: f64) -> Mat2 {
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    match kind {
        GateKind::H => [[r, r], [r, -r]],
        GateKind::X => [[ZERO, ONE], [ONE, ZERO]],
        GateKind::Y => [[ZERO, -I], [I, ZERO]],
        GateKind::Z => [[ONE, ZERO], [ZERO, -ONE]],
        GateKind::S => [[ONE, ZERO], [ZERO, I]],
        GateKind::T => [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]],
        GateKind::Rx => [
            [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        ],
        GateKind::Ry => [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ],
        GateKind::Rz => [
            [Complex64::from_polar(1.0, -angle / 2.0), ZERO],
            [ZERO, Complex64::from_polar(1.0, angle / 2.0)],
        ],
        GateKind::Cx | GateKind::Cz | GateKind::Swap => unreachable!("two-qubit gate"),
    }
}

impl StateVector {
    /// `|0…0⟩` on `n` qubits.
    pub fn zero(n: usize) -> Self {
        let mut amps = vec![ZERO; 1usize << n];
        amps[0] = ONE;
        Self { n, amps }
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Option<Self> {
        if !amps.len().is_power_of_two() {
            return None;
        }
        let n = amps.len().trailing_zeros() as usize;
        Some(Self { n, amps })
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies `op` in place. The op must be valid for this register width.
    pub fn apply(&mut self, op: &GateOp) {
        match op.kind {
            GateKind::Cx => self.apply_cx(op.targets[0], op.targets[1]),
            GateKind::Cz => self.apply_cz(op.targets[0], op.targets[1]),
            GateKind::Swap => self.apply_swap(op.targets[0], op.targets[1]),
            kind => {
                let m = single_qubit_matrix(kind, op.angle.unwrap_or(0.0));
                self.apply_single(op.targets[0], &m);
            }
        }
    }

    fn apply_single(&mut self, q: usize, m: &Mat2) {
        let stride = 1usize << q;
        for block in (0..self.amps.len()).step_by(stride << 1) {
            for i in block..block + stride {
                let j = i | stride;
                let (x, y) = (self.amps[i], self.amps[j]);
                self.amps[i] = m[0][0] * x + m[0][1] * y;
                self.amps[j] = m[1][0] * x + m[1][1] * y;
            }
        }
    }

    fn apply_cx(&mut self, control: usize, target: usize) {
        let (c, t) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let mask = (1usize << a) | (1usize << b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
    }

    fn apply_swap(&mut self, a: usize, b: usize) {
        let (ma, mb) = (1usize << a, 1usize << b);
        for i in 0..self.amps.len() {
            if i & ma != 0 && i & mb == 0 {
                self.amps.swap(i, (i & !ma) | mb);
            }
        }
    }

    /// Marginal distribution over `measured` (sorted ascending, indices < n).
    pub fn distribution(&self, measured: &[usize]) -> Distribution {
        let mut probs = vec![0.0; 1usize << measured.len()];
        let full = measured.len() == self.n && measured.iter().enumerate().all(|(i, &q)| i == q);
        for (b, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let outcome = if full {
                b
            } else {
                measured
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (k, &q)| acc | (((b >> q) & 1) << k))
            };
            probs[outcome] += p;
        }
        Distribution::from_dense(measured.len(), probs)
    }

    /// Marginal probabilities keyed by outcome bitstring. Outcomes with
    /// probability below 1e-14 are omitted.
    pub fn probabilities(&self, measured: &[usize]) -> BTreeMap<String, f64> {
        self.distribution(measured).to_map()
    }
}

/// Applies `op` to `state` and returns the result.
pub fn apply_gate(mut state: StateVector, op: &GateOp) -> StateVector {
    state.apply(op);
    state
}

/// Evolves `|0…0⟩` through every op of `circuit`.
pub fn run(circuit: &Circuit) -> Result<StateVector, SimError> {
    run_capped(circuit, DEFAULT_MAX_QUBITS)
}

pub fn run_capped(circuit: &Circuit, max_qubits: usize) -> Result<StateVector, SimError> {
    circuit.validate().into_result()?;
    if circuit.width > max_qubits {
        return Err(SimError::TooManyQubits {
            width: circuit.width,
            max: max_qubits,
        });
    }
    let mut state = StateVector::zero(circuit.width);
    for op in &circuit.ops {
        state.apply(op);
    }
    Ok(state)
}

/// Renders outcome `index` over `bits` measured qubits, highest qubit first.
pub fn outcome_label(index: usize, bits: usize) -> String {
    (0..bits)
        .rev()
        .map(|k| if (index >> k) & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Runs, marginalizes and samples `circuit` in one go.
pub fn execute(
    circuit: &Circuit,
    shots: u64,
    seed: u64,
    readout_flip_p: f64,
    max_qubits: usize,
    backend_name: &str,
) -> Result<ExecutionResult, SimError> {
    let start = Instant::now();
    circuit.validate_executable().into_result()?;
    let state = run_capped(circuit, max_qubits)?;
    let measured: Vec<usize> = circuit.measured.iter().copied().collect();
    let dist = state.distribution(&measured);
    let counts = sample(&dist, shots, seed, readout_flip_p)?;
    Ok(ExecutionResult {
        counts,
        shots,
        seed,
        duration_ms: start.elapsed().as_millis() as u64,
        backend_name: backend_name.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateOp;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn hadamard_on_zero() {
        let s = apply_gate(StateVector::zero(1), &GateOp::h(0));
        let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
        assert!(close(s.amplitudes()[0], r) && close(s.amplitudes()[1], r));
    }

    #[test]
    fn x_flips() {
        let s = apply_gate(StateVector::zero(1), &GateOp::x(0));
        assert!(close(s.amplitudes()[1], ONE));
    }

    #[test]
    fn cnot_under_bit_convention() {
        // |01⟩ with q0 = 1 is basis index 1.
        let s = apply_gate(StateVector::zero(2), &GateOp::x(0));
        let s = apply_gate(s, &GateOp::cx(0, 1));
        assert!(close(s.amplitudes()[3], ONE));
    }

    #[test]
    fn bell_state() {
        let s = run(&Circuit::bell()).unwrap();
        let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let expected = [r, ZERO, ZERO, r];
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert!(close(*a, e));
        }
    }

    #[test]
    fn empty_circuit_is_identity() {
        let s = run(&Circuit::new(2)).unwrap();
        assert_eq!(s, StateVector::zero(2));
    }

    #[test]
    fn bell_probabilities_and_marginal() {
        let s = run(&Circuit::bell()).unwrap();
        let both = s.probabilities(&[0, 1]);
        assert_eq!(both.len(), 2);
        assert!((both["00"] - 0.5).abs() < 1e-12 && (both["11"] - 0.5).abs() < 1e-12);
        let q0 = s.probabilities(&[0]);
        assert!((q0["0"] - 0.5).abs() < 1e-12 && (q0["1"] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ground_state_probabilities() {
        let p = StateVector::zero(2).probabilities(&[0, 1]);
        assert_eq!(p.len(), 1);
        assert_eq!(p["00"], 1.0);
    }

    #[test]
    fn marginal_respects_measured_order() {
        // X on q2 of three qubits, measure {0, 2}: outcome "10" (q2 leftmost).
        let mut c = Circuit::new(3);
        c.push(GateOp::x(2));
        let p = run(&c).unwrap().probabilities(&[0, 2]);
        assert_eq!(p.keys().collect::<Vec<_>>(), vec!["10"]);
    }

    #[test]
    fn width_cap_enforced() {
        let c = Circuit::new(5);
        assert!(matches!(
            run_capped(&c, 4),
            Err(SimError::TooManyQubits { width: 5, max: 4 })
        ));
    }

    #[test]
    fn swap_and_cz() {
        let mut c = Circuit::new(2);
        c.push(GateOp::x(0)).push(GateOp::two(GateKind::Swap, 0, 1));
        assert!(close(run(&c).unwrap().amplitudes()[2], ONE));

        let mut c = Circuit::new(2);
        c.push(GateOp::x(0))
            .push(GateOp::x(1))
            .push(GateOp::two(GateKind::Cz, 1, 0));
        assert!(close(run(&c).unwrap().amplitudes()[3], -ONE));
    }

    #[test]
    fn inverse_pairs_recover_state() {
        let mut base = Circuit::new(2);
        base.push(GateOp::h(0))
            .push(GateOp::rotation(GateKind::Ry, 0.7, 1))
            .push(GateOp::cx(0, 1));
        let before = run(&base).unwrap();
        let pairs = [
            (GateOp::x(1), GateOp::x(1)),
            (GateOp::h(0), GateOp::h(0)),
            (
                GateOp::rotation(GateKind::Rx, 1.3, 0),
                GateOp::rotation(GateKind::Rx, -1.3, 0),
            ),
        ];
        for (g, inv) in pairs {
            let after = apply_gate(apply_gate(before.clone(), &g), &inv);
            for (a, b) in after.amplitudes().iter().zip(before.amplitudes()) {
                assert!((a - b).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn outcome_labels() {
        assert_eq!(outcome_label(1, 3), "001");
        assert_eq!(outcome_label(6, 3), "110");
    }
}
