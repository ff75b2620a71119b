use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::simulator::Counts;

use super::eval::Env;
use super::{Bindings, PostError, PostStep};

/// Post-processed output: the function's value plus raw execution details.
#[derive(Debug, Clone, PartialEq)]
pub struct PostOutput {
    pub data: Value,
    pub details: Map<String, Value>,
}

enum Stage {
    Counts(Counts),
    Bitstring(String),
    Int(u64),
    Histogram(BTreeMap<String, f64>),
}

impl Stage {
    fn kind(&self) -> &'static str {
        match self {
            Stage::Counts(_) => "counts",
            Stage::Bitstring(_) => "a bitstring",
            Stage::Int(_) => "an integer",
            Stage::Histogram(_) => "a histogram",
        }
    }

    fn into_json(self) -> Value {
        match self {
            Stage::Counts(c) => json!(c),
            Stage::Bitstring(s) => Value::String(s),
            Stage::Int(i) => json!(i),
            Stage::Histogram(h) => json!(h),
        }
    }
}

/// Most frequent key; ties go to the lexicographically smallest.
fn top<V: PartialOrd + Copy>(map: &BTreeMap<String, V>) -> Option<String> {
    let mut best: Option<(&String, V)> = None;
    for (k, &v) in map {
        // BTreeMap iterates in ascending key order, so strict `>` keeps the
        // smallest key among equals.
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k.clone())
}

/// Applies `pipeline` left to right to `counts`. An empty pipeline behaves
/// like `[Identity]`. The raw counts are always included in the details.
pub fn postprocess(
    counts: &Counts,
    pipeline: &[PostStep],
    bindings: &Bindings,
) -> Result<PostOutput, PostError> {
    let width = counts
        .keys()
        .next()
        .map(|k| k.len())
        .ok_or_else(|| PostError::InvalidCounts("no outcomes".into()))?;
    if let Some(bad) = counts
        .keys()
        .find(|k| k.len() != width || !k.bytes().all(|b| b == b'0' || b == b'1'))
    {
        return Err(PostError::InvalidCounts(format!(
            "outcome `{bad}` is not a {width}-bit string"
        )));
    }

    let env = Env::new(bindings);
    let mut stage = Stage::Counts(counts.clone());
    for step in pipeline {
        let mismatch = |s: &Stage| PostError::PipelineTypeError {
            step: step.name(),
            found: s.kind(),
        };
        stage = match (step, stage) {
            (PostStep::Identity, s) => s,
            (PostStep::Top, Stage::Counts(c)) => Stage::Bitstring(top(&c).expect("nonempty")),
            (PostStep::Top, Stage::Histogram(h)) => Stage::Bitstring(top(&h).expect("nonempty")),
            (PostStep::ToInt, Stage::Bitstring(b)) => {
                if b.len() > 64 {
                    return Err(PostError::InvalidCounts(format!(
                        "{}-bit outcome does not fit an integer",
                        b.len()
                    )));
                }
                Stage::Int(u64::from_str_radix(&b, 2).expect("validated bitstring"))
            }
            (PostStep::Mod(expr), Stage::Int(v)) => {
                let n = env.eval_int(expr)?;
                if n < 1 {
                    return Err(PostError::InvalidModulus(n));
                }
                Stage::Int(v % n as u64)
            }
            (PostStep::Histogram, Stage::Counts(c)) => {
                let shots: u64 = c.values().sum();
                Stage::Histogram(
                    c.into_iter()
                        .map(|(k, n)| (k, n as f64 / shots as f64))
                        .collect(),
                )
            }
            (_, s) => return Err(mismatch(&s)),
        };
    }

    let mut details = Map::new();
    details.insert("counts".into(), json!(counts));
    Ok(PostOutput {
        data: stage.into_json(),
        details,
    })
}
