//! The function-definition language.
//!
//! A `.qf` source declares typed input parameters, a parameterized circuit
//! template and a post-processing pipeline:
//!
//! ```text
//! fn qrng
//! param n : int min=1 max=24 default=4
//! circuit {
//!     qubits n
//!     repeat q in 0..n { h q }
//!     measure all
//! }
//! post top | to_int
//! ```
//!
//! [`parse`] checks the source statically, [`preprocess`] binds raw request
//! input to the declared parameters, [`instantiate`] expands the template into
//! a [`Circuit`](crate::circuit::Circuit) and [`postprocess`] turns measured
//! counts into the function's output value. See `docs/dsl.md` for the grammar.

mod eval;
mod lexer;
mod parser;
mod post;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{GateKind, Violation};

pub use eval::{instantiate, preprocess};
pub use parser::parse;
pub use post::{postprocess, PostOutput};

/// Bound parameter values.
pub type Bindings = BTreeMap<String, i64>;

/// Loops may nest at most this deep.
pub const MAX_NESTING: usize = 4;
/// Upper bound on the number of gates a template may expand to.
pub const MAX_EXPANDED_OPS: usize = 1_000_000;
/// Upper bound on the register width a template may request.
pub const MAX_TEMPLATE_WIDTH: i64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// SDK-flavour tag. Stored and displayed; it does not change semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Template {
    Qiskit,
    Cirq,
    Qsharp,
    Braket,
}

impl Template {
    pub const ALL: [Template; 4] = [
        Template::Qiskit,
        Template::Cirq,
        Template::Qsharp,
        Template::Braket,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Template::Qiskit => "qiskit",
            Template::Cirq => "cirq",
            Template::Qsharp => "qsharp",
            Template::Braket => "braket",
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Template {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Template::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template `{s}` (expected qiskit, cirq, qsharp or braket)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDef {
    pub name: String,
    pub template: Template,
    pub params: Vec<ParamDecl>,
    pub circuit_template: TemplateBlock,
    pub post_pipeline: Vec<PostStep>,
}

impl FunctionDef {
    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    Int,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub min: Option<i64>,
    pub max: Option<i64>,
    pub default: Option<i64>,
}

impl ParamDecl {
    pub fn in_range(&self, value: i64) -> bool {
        self.min.is_none_or(|m| value >= m) && self.max.is_none_or(|m| value <= m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBlock {
    pub qubits_expr: Expr,
    pub statements: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statement {
    Gate {
        kind: GateKind,
        angle: Option<Expr>,
        targets: Vec<Expr>,
        pos: Pos,
    },
    Repeat {
        var: String,
        start: Expr,
        end: Expr,
        body: Vec<Statement>,
        pos: Pos,
    },
    Measure {
        targets: MeasureTargets,
        pos: Pos,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureTargets {
    All,
    Qubits(Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Int(i64),
    Real(f64),
    Pi,
    Var { name: String, pos: Pos },
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostStep {
    Top,
    ToInt,
    Mod(Expr),
    Histogram,
    Identity,
}

impl PostStep {
    pub fn name(&self) -> &'static str {
        match self {
            PostStep::Top => "top",
            PostStep::ToInt => "to_int",
            PostStep::Mod(_) => "mod",
            PostStep::Histogram => "histogram",
            PostStep::Identity => "identity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseErrorKind {
    UnexpectedCharacter,
    InvalidNumber,
    UnexpectedToken,
    UnknownGate,
    UnknownTemplate,
    UnknownPostStep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    pub kind: ParseErrorKind,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StaticRule {
    MissingCircuit,
    DuplicateSection,
    MissingQubits,
    MisplacedQubits,
    MissingMeasure,
    DuplicateMeasure,
    MeasureNotLast,
    MeasureInLoop,
    DuplicateParam,
    UndeclaredIdentifier,
    ShadowedName,
    InvalidParamBounds,
    DefaultOutOfRange,
    NestingTooDeep,
    WrongArity,
    AngleMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("{line}:{column}: {rule:?}: {message}")]
pub struct StaticError {
    pub rule: StaticRule,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("static error at {0}")]
    Static(#[from] StaticError),
}

impl DslError {
    pub fn line(&self) -> u32 {
        match self {
            DslError::Parse(e) => e.line,
            DslError::Static(e) => e.line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("missing value for parameter `{param}`")]
    MissingParam { param: String },
    #[error("parameter `{param}` = {value} outside [{}, {}]", fmt_bound(.min), fmt_bound(.max))]
    RangeViolation {
        param: String,
        value: i64,
        min: Option<i64>,
        max: Option<i64>,
    },
    #[error("{0}")]
    TypeViolation(String),
}

fn fmt_bound(b: &Option<i64>) -> String {
    b.map_or_else(|| "-".to_string(), |v| v.to_string())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("register width must be at least 1, got {0}")]
    NonPositiveWidth(i64),
    #[error("register width {0} exceeds the template limit")]
    WidthTooLarge(i64),
    #[error("integer overflow")]
    Overflow,
    #[error("expected an integer, got {0}")]
    NotAnInteger(f64),
    #[error("qubit index {0} is negative")]
    NegativeIndex(i64),
    #[error("range {start}..{end} is reversed")]
    ReversedRange { start: i64, end: i64 },
    #[error("unbound identifier `{0}`")]
    Unbound(String),
    #[error("template expands to more than {MAX_EXPANDED_OPS} gates")]
    TooManyOps,
    #[error("generated circuit is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidCircuit(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PostError {
    #[error("step `{step}` cannot be applied to {found}")]
    PipelineTypeError { step: &'static str, found: &'static str },
    #[error("invalid counts: {0}")]
    InvalidCounts(String),
    #[error("mod divisor must be at least 1, got {0}")]
    InvalidModulus(i64),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
