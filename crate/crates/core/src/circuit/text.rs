//! Line-oriented circuit text:
//!
//! ```text
//! qubits 2
//! h 0
//! rx(1.5707963267948966) 1
//! cx 0 1
//! measure all
//! ```
//!
//! The header comes first, then one op per line, then an optional trailing
//! `measure all` or `measure <q>...`. Blank lines and `#` comments are ignored.

use std::collections::BTreeSet;
use std::fmt::Write;

use thiserror::Error;

use super::{Circuit, GateKind, GateOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct TextError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> TextError {
    TextError {
        line,
        message: message.into(),
    }
}

pub(super) fn render(circuit: &Circuit) -> String {
    let mut out = format!("qubits {}", circuit.width);
    for op in &circuit.ops {
        out.push('\n');
        out.push_str(op.kind.mnemonic());
        if let Some(angle) = op.angle {
            // `{}` on f64 prints the shortest representation that parses back
            // to the same value.
            let _ = write!(out, "({angle})");
        }
        for q in &op.targets {
            let _ = write!(out, " {q}");
        }
    }
    if circuit.measures_all() {
        out.push_str("\nmeasure all");
    } else if !circuit.measured.is_empty() {
        out.push_str("\nmeasure");
        for q in &circuit.measured {
            let _ = write!(out, " {q}");
        }
    }
    out
}

pub(super) fn parse(source: &str) -> Result<Circuit, TextError> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines.next().ok_or_else(|| err(1, "missing `qubits` header"))?;
    let width = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["qubits", n] => parse_index(n, header_line)?,
        _ => return Err(err(header_line, "expected `qubits <n>` header")),
    };

    let mut circuit = Circuit::new(width);
    let mut measured: Option<usize> = None;
    for (line_no, line) in lines {
        if let Some(measure_line) = measured {
            return Err(err(
                line_no,
                format!("unexpected content after measure on line {measure_line}"),
            ));
        }
        let mut words = line.split_whitespace();
        let head = words.next().unwrap_or_default();
        if head == "measure" {
            let rest: Vec<&str> = words.collect();
            circuit.measured = match rest.as_slice() {
                ["all"] => (0..width).collect(),
                [] => return Err(err(line_no, "measure needs `all` or qubit indices")),
                qs => qs
                    .iter()
                    .map(|q| parse_index(q, line_no))
                    .collect::<Result<BTreeSet<_>, _>>()?,
            };
            measured = Some(line_no);
            continue;
        }
        let (name, angle) = match head.split_once('(') {
            Some((name, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| err(line_no, "unterminated angle"))?;
                let angle: f64 = inner
                    .parse()
                    .map_err(|_| err(line_no, format!("invalid angle `{inner}`")))?;
                (name, Some(angle))
            }
            None => (head, None),
        };
        let kind = GateKind::from_mnemonic(name)
            .ok_or_else(|| err(line_no, format!("unknown gate `{name}`")))?;
        if kind.takes_angle() != angle.is_some() {
            return Err(err(
                line_no,
                if kind.takes_angle() {
                    format!("`{name}` requires an angle")
                } else {
                    format!("`{name}` does not take an angle")
                },
            ));
        }
        let targets = words
            .map(|w| parse_index(w, line_no))
            .collect::<Result<Vec<_>, _>>()?;
        if targets.len() != kind.arity() {
            return Err(err(
                line_no,
                format!("`{name}` expects {} qubit(s)", kind.arity()),
            ));
        }
        circuit.ops.push(GateOp {
            kind,
            targets,
            angle,
        });
    }
    Ok(circuit)
}

fn parse_index(word: &str, line: usize) -> Result<usize, TextError> {
    word.parse()
        .map_err(|_| err(line, format!("expected a non-negative integer, found `{word}`")))
}
