use std::collections::{BTreeSet, HashMap};

use serde_json::Value;

use crate::circuit::{Circuit, GateOp};

use super::{
    BinOp, Bindings, EvalError, Expr, FunctionDef, MeasureTargets, PreprocessError, Statement,
    MAX_EXPANDED_OPS, MAX_TEMPLATE_WIDTH,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(super) enum Num {
    Int(i64),
    Real(f64),
}

impl Num {
    fn as_real(self) -> f64 {
        match self {
            Num::Int(i) => i as f64,
            Num::Real(r) => r,
        }
    }

    pub(super) fn as_int(self) -> Result<i64, EvalError> {
        match self {
            Num::Int(i) => Ok(i),
            Num::Real(r) => Err(EvalError::NotAnInteger(r)),
        }
    }
}

pub(super) struct Env<'a> {
    bindings: &'a Bindings,
    locals: HashMap<String, i64>,
}

impl<'a> Env<'a> {
    pub(super) fn new(bindings: &'a Bindings) -> Self {
        Self {
            bindings,
            locals: HashMap::new(),
        }
    }

    fn lookup(&self, name: &str) -> Result<i64, EvalError> {
        self.locals
            .get(name)
            .or_else(|| self.bindings.get(name))
            .copied()
            .ok_or_else(|| EvalError::Unbound(name.to_string()))
    }

    pub(super) fn eval(&self, expr: &Expr) -> Result<Num, EvalError> {
        Ok(match expr {
            Expr::Int(i) => Num::Int(*i),
            Expr::Real(r) => Num::Real(*r),
            Expr::Pi => Num::Real(std::f64::consts::PI),
            Expr::Var { name, .. } => Num::Int(self.lookup(name)?),
            Expr::Neg(e) => match self.eval(e)? {
                Num::Int(i) => Num::Int(i.checked_neg().ok_or(EvalError::Overflow)?),
                Num::Real(r) => Num::Real(-r),
            },
            Expr::Bin(op, a, b) => binary(*op, self.eval(a)?, self.eval(b)?)?,
        })
    }

    pub(super) fn eval_int(&self, expr: &Expr) -> Result<i64, EvalError> {
        self.eval(expr)?.as_int()
    }

    fn eval_index(&self, expr: &Expr) -> Result<usize, EvalError> {
        let v = self.eval_int(expr)?;
        usize::try_from(v).map_err(|_| EvalError::NegativeIndex(v))
    }
}

fn binary(op: BinOp, a: Num, b: Num) -> Result<Num, EvalError> {
    if let (Num::Int(x), Num::Int(y)) = (a, b) {
        let v = match op {
            BinOp::Add => x.checked_add(y),
            BinOp::Sub => x.checked_sub(y),
            BinOp::Mul => x.checked_mul(y),
            BinOp::Div | BinOp::Rem if y == 0 => return Err(EvalError::DivisionByZero),
            BinOp::Div => x.checked_div(y),
            BinOp::Rem => x.checked_rem(y),
        };
        return v.map(Num::Int).ok_or(EvalError::Overflow);
    }
    let (x, y) = (a.as_real(), b.as_real());
    Ok(Num::Real(match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        BinOp::Div | BinOp::Rem if y == 0.0 => return Err(EvalError::DivisionByZero),
        BinOp::Div => x / y,
        BinOp::Rem => x % y,
    }))
}

fn coerce(param: &str, value: &Value) -> Result<i64, PreprocessError> {
    let mismatch = || {
        PreprocessError::TypeViolation(format!(
            "parameter `{param}` expects an integer, got {value}"
        ))
    };
    match value {
        Value::Number(n) => n.as_i64().ok_or_else(mismatch),
        Value::String(s) => s.trim().parse::<i64>().map_err(|_| mismatch()),
        _ => Err(mismatch()),
    }
}

/// Binds raw request input to the function's declared parameters.
///
/// A scalar binds to the sole parameter, an object binds by name, and `null`
/// leaves every parameter to its default. Integer-valued strings are accepted.
pub fn preprocess(def: &FunctionDef, raw_input: &Value) -> Result<Bindings, PreprocessError> {
    let mut supplied: HashMap<&str, &Value> = HashMap::new();
    match raw_input {
        Value::Null => {}
        Value::Object(map) => {
            for (key, value) in map {
                let decl = def.param(key).ok_or_else(|| {
                    PreprocessError::TypeViolation(format!("unknown parameter `{key}`"))
                })?;
                if !value.is_null() {
                    supplied.insert(decl.name.as_str(), value);
                }
            }
        }
        Value::Array(_) | Value::Bool(_) => {
            return Err(PreprocessError::TypeViolation(format!(
                "input must be a scalar or an object, got {raw_input}"
            )))
        }
        scalar => match def.params.as_slice() {
            [only] => {
                supplied.insert(only.name.as_str(), scalar);
            }
            params => {
                return Err(PreprocessError::TypeViolation(format!(
                    "scalar input needs exactly one parameter, function declares {}",
                    params.len()
                )))
            }
        },
    }

    let mut bindings = Bindings::new();
    for decl in &def.params {
        let value = match supplied.get(decl.name.as_str()) {
            Some(v) => coerce(&decl.name, v)?,
            None => decl.default.ok_or_else(|| PreprocessError::MissingParam {
                param: decl.name.clone(),
            })?,
        };
        if !decl.in_range(value) {
            return Err(PreprocessError::RangeViolation {
                param: decl.name.clone(),
                value,
                min: decl.min,
                max: decl.max,
            });
        }
        bindings.insert(decl.name.clone(), value);
    }
    Ok(bindings)
}

/// Expands the circuit template under `bindings`. Pure: the same inputs
/// always produce the same circuit.
pub fn instantiate(def: &FunctionDef, bindings: &Bindings) -> Result<Circuit, EvalError> {
    let mut env = Env::new(bindings);
    let width = env.eval_int(&def.circuit_template.qubits_expr)?;
    if width < 1 {
        return Err(EvalError::NonPositiveWidth(width));
    }
    if width > MAX_TEMPLATE_WIDTH {
        return Err(EvalError::WidthTooLarge(width));
    }
    let mut circuit = Circuit::new(width as usize);
    expand(&def.circuit_template.statements, &mut env, &mut circuit)?;
    circuit
        .validate_executable()
        .into_result()
        .map_err(|crate::circuit::CircuitError::Invalid(v)| EvalError::InvalidCircuit(v))?;
    Ok(circuit)
}

fn expand(stmts: &[Statement], env: &mut Env, circuit: &mut Circuit) -> Result<(), EvalError> {
    for stmt in stmts {
        match stmt {
            Statement::Gate {
                kind,
                angle,
                targets,
                ..
            } => {
                if circuit.ops.len() >= MAX_EXPANDED_OPS {
                    return Err(EvalError::TooManyOps);
                }
                let angle = angle.as_ref().map(|a| env.eval(a)).transpose()?.map(Num::as_real);
                let targets = targets
                    .iter()
                    .map(|t| env.eval_index(t))
                    .collect::<Result<Vec<_>, _>>()?;
                circuit.ops.push(GateOp {
                    kind: *kind,
                    targets,
                    angle,
                });
            }
            Statement::Repeat {
                var,
                start,
                end,
                body,
                ..
            } => {
                let (a, b) = (env.eval_int(start)?, env.eval_int(end)?);
                if a > b {
                    return Err(EvalError::ReversedRange { start: a, end: b });
                }
                for i in a..b {
                    env.locals.insert(var.clone(), i);
                    expand(body, env, circuit)?;
                }
                env.locals.remove(var);
            }
            Statement::Measure { targets, .. } => {
                circuit.measured = match targets {
                    MeasureTargets::All => (0..circuit.width).collect(),
                    MeasureTargets::Qubits(qs) => qs
                        .iter()
                        .map(|q| env.eval_index(q))
                        .collect::<Result<BTreeSet<_>, _>>()?,
                };
            }
        }
    }
    Ok(())
}
