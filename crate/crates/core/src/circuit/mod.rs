//! Gate-list circuit representation shared by the DSL, the simulator and the
//! backends.
//!
//! A [`Circuit`] is a fixed-width register, an ordered list of [`GateOp`]s and
//! the set of qubits measured once all gates have been applied. Measurement
//! only happens at the end of the circuit.

mod text;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use text::TextError;

/// Supported gate kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    T,
    Rx,
    Ry,
    Rz,
    Cx,
    Cz,
    Swap,
}

impl GateKind {
    pub const ALL: [GateKind; 12] = [
        GateKind::H,
        GateKind::X,
        GateKind::Y,
        GateKind::Z,
        GateKind::S,
        GateKind::T,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::Cx,
        GateKind::Cz,
        GateKind::Swap,
    ];

    /// Number of qubits the gate acts on.
    pub fn arity(self) -> usize {
        match self {
            GateKind::Cx | GateKind::Cz | GateKind::Swap => 2,
            _ => 1,
        }
    }

    /// Rotation gates carry an angle.
    pub fn takes_angle(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    /// Lowercase mnemonic used by the text format and the DSL.
    pub fn mnemonic(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Y => "y",
            GateKind::Z => "z",
            GateKind::S => "s",
            GateKind::T => "t",
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::Cx => "cx",
            GateKind::Cz => "cz",
            GateKind::Swap => "swap",
        }
    }

    pub fn from_mnemonic(name: &str) -> Option<GateKind> {
        GateKind::ALL.into_iter().find(|k| k.mnemonic() == name)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// One gate application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl GateOp {
    pub fn single(kind: GateKind, qubit: usize) -> Self {
        Self {
            kind,
            targets: vec![qubit],
            angle: None,
        }
    }

    pub fn rotation(kind: GateKind, angle: f64, qubit: usize) -> Self {
        Self {
            kind,
            targets: vec![qubit],
            angle: Some(angle),
        }
    }

    pub fn two(kind: GateKind, a: usize, b: usize) -> Self {
        Self {
            kind,
            targets: vec![a, b],
            angle: None,
        }
    }

    pub fn h(q: usize) -> Self {
        Self::single(GateKind::H, q)
    }

    pub fn x(q: usize) -> Self {
        Self::single(GateKind::X, q)
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Self::two(GateKind::Cx, control, target)
    }
}

/// A quantum circuit: register width, gates, and end-of-circuit measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub width: usize,
    pub ops: Vec<GateOp>,
    pub measured: BTreeSet<usize>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            ops: Vec::new(),
            measured: BTreeSet::new(),
        }
    }

    pub fn push(&mut self, op: GateOp) -> &mut Self {
        self.ops.push(op);
        self
    }

    pub fn measure_all(&mut self) -> &mut Self {
        self.measured = (0..self.width).collect();
        self
    }

    pub fn measures_all(&self) -> bool {
        self.width > 0 && self.measured.len() == self.width
    }

    /// The two-qubit Bell preparation `h 0; cx 0 1`, measuring both qubits.
    pub fn bell() -> Self {
        let mut c = Circuit::new(2);
        c.push(GateOp::h(0)).push(GateOp::cx(0, 1)).measure_all();
        c
    }

    /// Checks every structural invariant and reports all violations found.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.width == 0 {
            violations.push(Violation::circuit(Rule::ZeroWidth));
        }
        for (index, op) in self.ops.iter().enumerate() {
            let mut push = |rule| violations.push(Violation { op_index: Some(index), rule });
            if op.targets.len() != op.kind.arity() {
                push(Rule::WrongArity {
                    expected: op.kind.arity(),
                    found: op.targets.len(),
                });
            }
            if let Some(&q) = op.targets.iter().find(|&&q| q >= self.width) {
                push(Rule::IndexOutOfRange {
                    qubit: q,
                    width: self.width,
                });
            }
            if op.targets.len() == 2 && op.targets[0] == op.targets[1] {
                push(Rule::DuplicateTargets);
            }
            match (op.kind.takes_angle(), op.angle) {
                (true, None) => push(Rule::MissingAngle),
                (false, Some(_)) => push(Rule::UnexpectedAngle),
                (true, Some(a)) if !a.is_finite() => push(Rule::NonFiniteAngle),
                _ => {}
            }
        }
        for &q in &self.measured {
            if q >= self.width {
                violations.push(Violation::circuit(Rule::MeasuredOutOfRange {
                    qubit: q,
                    width: self.width,
                }));
            }
        }
        ValidationReport { violations }
    }

    /// Like [`Circuit::validate`], but additionally requires a nonempty
    /// measured set, which any circuit submitted for execution needs.
    pub fn validate_executable(&self) -> ValidationReport {
        let mut report = self.validate();
        if self.measured.is_empty() {
            report.violations.push(Violation::circuit(Rule::NothingMeasured));
        }
        report
    }

    pub fn stats(&self) -> Result<CircuitStats, CircuitError> {
        self.validate().into_result()?;
        let mut last_layer: HashMap<usize, usize> = HashMap::new();
        let mut depth = 0;
        let mut two_qubit_count = 0;
        for op in &self.ops {
            if op.targets.len() == 2 {
                two_qubit_count += 1;
            }
            let layer = 1 + op
                .targets
                .iter()
                .map(|q| last_layer.get(q).copied().unwrap_or(0))
                .max()
                .unwrap_or(0);
            for &q in &op.targets {
                last_layer.insert(q, layer);
            }
            depth = depth.max(layer);
        }
        Ok(CircuitStats {
            width: self.width,
            gate_count: self.ops.len(),
            two_qubit_count,
            depth,
        })
    }

    pub fn to_text(&self) -> Result<String, CircuitError> {
        self.validate().into_result()?;
        Ok(text::render(self))
    }

    pub fn from_text(source: &str) -> Result<Circuit, TextError> {
        text::parse(source)
    }
}

/// Counts describing a circuit's shape; these feed backend selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub width: usize,
    pub gate_count: usize,
    pub two_qubit_count: usize,
    /// Layers under greedy left-to-right packing; ops sharing a qubit never
    /// share a layer.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    ZeroWidth,
    WrongArity { expected: usize, found: usize },
    IndexOutOfRange { qubit: usize, width: usize },
    DuplicateTargets,
    MissingAngle,
    UnexpectedAngle,
    NonFiniteAngle,
    MeasuredOutOfRange { qubit: usize, width: usize },
    NothingMeasured,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::ZeroWidth => write!(f, "circuit width must be at least 1"),
            Rule::WrongArity { expected, found } => {
                write!(f, "expected {expected} target(s), found {found}")
            }
            Rule::IndexOutOfRange { qubit, width } => {
                write!(f, "qubit {qubit} out of range for width {width}")
            }
            Rule::DuplicateTargets => write!(f, "two-qubit gate targets must be distinct"),
            Rule::MissingAngle => write!(f, "rotation gate requires an angle"),
            Rule::UnexpectedAngle => write!(f, "gate does not take an angle"),
            Rule::NonFiniteAngle => write!(f, "angle must be finite"),
            Rule::MeasuredOutOfRange { qubit, width } => {
                write!(f, "measured qubit {qubit} out of range for width {width}")
            }
            Rule::NothingMeasured => write!(f, "circuit measures no qubits"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending op; `None` for circuit-level rules.
    pub op_index: Option<usize>,
    #[serde(flatten)]
    pub rule: Rule,
}

impl Violation {
    fn circuit(rule: Rule) -> Self {
        Self { op_index: None, rule }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.op_index {
            Some(i) => write!(f, "op {i}: {}", self.rule),
            None => write!(f, "{}", self.rule),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), CircuitError> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(CircuitError::Invalid(self.violations))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("invalid circuit: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
