use crate::circuit::GateKind;

use super::lexer::{tokenize, Tok, Token};
use super::{
    BinOp, DslError, Expr, FunctionDef, MeasureTargets, ParamDecl, ParamType, ParseError,
    ParseErrorKind, Pos, PostStep, Statement, StaticError, StaticRule, Template, TemplateBlock,
    MAX_NESTING,
};

/// Parses and statically checks a function source.
pub fn parse(source: &str) -> Result<FunctionDef, DslError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, at: 0 };
    let raw = p.function()?;
    check(raw)
}

/// Circuit block statements before the `qubits` header is split off.
enum RawStmt {
    Qubits(Expr, Pos),
    Stmt(Statement),
    Repeat {
        var: String,
        start: Expr,
        end: Expr,
        body: Vec<RawStmt>,
        pos: Pos,
    },
}

struct RawFunction {
    name: String,
    name_pos: Pos,
    template: Option<Template>,
    params: Vec<(ParamDecl, Pos)>,
    circuit: Option<(Vec<RawStmt>, Pos)>,
    post: Vec<PostStep>,
    post_pos: Option<Pos>,
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

type PResult<T> = Result<T, DslError>;

fn static_err(rule: StaticRule, pos: Pos, message: impl Into<String>) -> DslError {
    DslError::Static(StaticError {
        rule,
        line: pos.line,
        column: pos.column,
        message: message.into(),
    })
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn error(&self, kind: ParseErrorKind, message: impl Into<String>) -> DslError {
        let pos = self.pos();
        DslError::Parse(ParseError {
            line: pos.line,
            column: pos.column,
            kind,
            message: message.into(),
        })
    }

    fn unexpected(&self, wanted: &str) -> DslError {
        self.error(
            ParseErrorKind::UnexpectedToken,
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(wanted))
        }
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == word)
    }

    fn expect_word(&mut self, word: &str) -> PResult<Pos> {
        if self.is_word(word) {
            Ok(self.bump().pos)
        } else {
            Err(self.unexpected(&format!("`{word}`")))
        }
    }

    fn ident(&mut self, wanted: &str) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let pos = self.bump().pos;
                Ok((name, pos))
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn skip_seps(&mut self) {
        while *self.peek() == Tok::Sep {
            self.bump();
        }
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Sep => {
                self.bump();
                Ok(())
            }
            Tok::Eof | Tok::RBrace => Ok(()),
            _ => Err(self.unexpected("end of statement")),
        }
    }

    fn function(&mut self) -> PResult<RawFunction> {
        self.skip_seps();
        self.expect_word("fn")?;
        let (mut name, name_pos) = self.ident("function name")?;
        while *self.peek() == Tok::Minus {
            self.bump();
            match self.bump().tok {
                Tok::Ident(part) => name.push_str(&format!("-{part}")),
                Tok::Int(part) => name.push_str(&format!("-{part}")),
                _ => return Err(self.unexpected("function name segment")),
            }
        }
        self.end_of_statement()?;

        let mut f = RawFunction {
            name,
            name_pos,
            template: None,
            params: Vec::new(),
            circuit: None,
            post: Vec::new(),
            post_pos: None,
        };
        loop {
            self.skip_seps();
            let pos = self.pos();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(word) => match word.as_str() {
                    "template" => {
                        self.bump();
                        if f.template.is_some() {
                            return Err(static_err(StaticRule::DuplicateSection, pos, "template declared twice"));
                        }
                        let (t, _) = self.ident("template name")?;
                        let template = t.parse::<Template>().map_err(|m| {
                            DslError::Parse(ParseError {
                                line: pos.line,
                                column: pos.column,
                                kind: ParseErrorKind::UnknownTemplate,
                                message: m,
                            })
                        })?;
                        f.template = Some(template);
                        self.end_of_statement()?;
                    }
                    "param" => {
                        self.bump();
                        f.params.push((self.param()?, pos));
                        self.end_of_statement()?;
                    }
                    "circuit" => {
                        self.bump();
                        if f.circuit.is_some() {
                            return Err(static_err(StaticRule::DuplicateSection, pos, "circuit declared twice"));
                        }
                        self.expect(Tok::LBrace, "`{`")?;
                        let body = self.block()?;
                        self.expect(Tok::RBrace, "`}`")?;
                        f.circuit = Some((body, pos));
                        self.end_of_statement()?;
                    }
                    "post" => {
                        self.bump();
                        if f.post_pos.is_some() {
                            return Err(static_err(StaticRule::DuplicateSection, pos, "post declared twice"));
                        }
                        f.post = self.pipeline()?;
                        f.post_pos = Some(pos);
                        self.end_of_statement()?;
                    }
                    _ => return Err(self.unexpected("`template`, `param`, `circuit` or `post`")),
                },
                _ => return Err(self.unexpected("`template`, `param`, `circuit` or `post`")),
            }
        }
        Ok(f)
    }

    fn signed_int(&mut self) -> PResult<i64> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.unexpected("integer")),
        }
    }

    fn param(&mut self) -> PResult<ParamDecl> {
        let (name, _) = self.ident("parameter name")?;
        self.expect(Tok::Colon, "`:`")?;
        self.expect_word("int")?;
        let mut decl = ParamDecl {
            name,
            ty: ParamType::Int,
            min: None,
            max: None,
            default: None,
        };
        while let Tok::Ident(attr) = self.peek().clone() {
            let slot = match attr.as_str() {
                "min" => &mut decl.min,
                "max" => &mut decl.max,
                "default" => &mut decl.default,
                _ => return Err(self.unexpected("`min`, `max` or `default`")),
            };
            self.bump();
            self.expect(Tok::Eq, "`=`")?;
            *slot = Some(self.signed_int()?);
        }
        Ok(decl)
    }

    fn block(&mut self) -> PResult<Vec<RawStmt>> {
        let mut stmts = Vec::new();
        loop {
            self.skip_seps();
            if matches!(self.peek(), Tok::RBrace | Tok::Eof) {
                return Ok(stmts);
            }
            stmts.push(self.statement()?);
            self.end_of_statement()?;
        }
    }

    fn statement(&mut self) -> PResult<RawStmt> {
        let pos = self.pos();
        let (word, _) = self.ident("statement")?;
        match word.as_str() {
            "qubits" => Ok(RawStmt::Qubits(self.expr()?, pos)),
            "repeat" => {
                let (var, _) = self.ident("loop variable")?;
                self.expect_word("in")?;
                let start = self.expr()?;
                self.expect(Tok::DotDot, "`..`")?;
                let end = self.expr()?;
                self.expect(Tok::LBrace, "`{`")?;
                let body = self.block()?;
                self.expect(Tok::RBrace, "`}`")?;
                Ok(RawStmt::Repeat {
                    var,
                    start,
                    end,
                    body,
                    pos,
                })
            }
            "measure" => {
                let targets = if self.is_word("all") {
                    self.bump();
                    MeasureTargets::All
                } else {
                    let qs = self.expr_list()?;
                    if qs.is_empty() {
                        return Err(self.unexpected("`all` or qubit indices"));
                    }
                    MeasureTargets::Qubits(qs)
                };
                Ok(RawStmt::Stmt(Statement::Measure { targets, pos }))
            }
            mnemonic => {
                let kind = GateKind::from_mnemonic(mnemonic).ok_or_else(|| {
                    DslError::Parse(ParseError {
                        line: pos.line,
                        column: pos.column,
                        kind: ParseErrorKind::UnknownGate,
                        message: format!("unknown gate `{mnemonic}`"),
                    })
                })?;
                // Only rotations take `(angle)`; elsewhere `(` opens a target expression.
                let angle = if kind.takes_angle() && *self.peek() == Tok::LParen {
                    self.bump();
                    let e = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Some(e)
                } else {
                    None
                };
                let targets = self.expr_list()?;
                Ok(RawStmt::Stmt(Statement::Gate {
                    kind,
                    angle,
                    targets,
                    pos,
                }))
            }
        }
    }

    /// Whitespace- or comma-separated expressions up to the end of the statement.
    fn expr_list(&mut self) -> PResult<Vec<Expr>> {
        let mut out = Vec::new();
        while !matches!(self.peek(), Tok::Sep | Tok::Eof | Tok::RBrace) {
            out.push(self.expr()?);
            if *self.peek() == Tok::Comma {
                self.bump();
            }
        }
        Ok(out)
    }

    fn pipeline(&mut self) -> PResult<Vec<PostStep>> {
        let mut steps = vec![self.post_step()?];
        while *self.peek() == Tok::Pipe {
            self.bump();
            steps.push(self.post_step()?);
        }
        Ok(steps)
    }

    fn post_step(&mut self) -> PResult<PostStep> {
        let pos = self.pos();
        let (word, _) = self.ident("post-processing step")?;
        Ok(match word.as_str() {
            "top" => PostStep::Top,
            "to_int" => PostStep::ToInt,
            "histogram" => PostStep::Histogram,
            "identity" => PostStep::Identity,
            "mod" => PostStep::Mod(self.expr()?),
            other => {
                return Err(DslError::Parse(ParseError {
                    line: pos.line,
                    column: pos.column,
                    kind: ParseErrorKind::UnknownPostStep,
                    message: format!("unknown post-processing step `{other}`"),
                }))
            }
        })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::Float(v) => {
                self.bump();
                Ok(Expr::Real(v))
            }
            Tok::Ident(name) => {
                let pos = self.bump().pos;
                if name == "pi" {
                    Ok(Expr::Pi)
                } else {
                    Ok(Expr::Var { name, pos })
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

/// Scope for identifier resolution: params plus enclosing loop variables.
struct Scope<'a> {
    params: Vec<&'a str>,
    loops: Vec<String>,
}

impl Scope<'_> {
    fn contains(&self, name: &str) -> bool {
        self.params.contains(&name) || self.loops.iter().any(|l| l == name)
    }
}

fn check_expr(expr: &Expr, scope: &Scope) -> PResult<()> {
    match expr {
        Expr::Int(_) | Expr::Real(_) | Expr::Pi => Ok(()),
        Expr::Var { name, pos } => {
            if scope.contains(name) {
                Ok(())
            } else {
                Err(static_err(
                    StaticRule::UndeclaredIdentifier,
                    *pos,
                    format!("undeclared identifier `{name}`"),
                ))
            }
        }
        Expr::Neg(e) => check_expr(e, scope),
        Expr::Bin(_, a, b) => {
            check_expr(a, scope)?;
            check_expr(b, scope)
        }
    }
}

fn check_body(raw: Vec<RawStmt>, scope: &mut Scope, depth: usize) -> PResult<Vec<Statement>> {
    let mut out = Vec::with_capacity(raw.len());
    for stmt in raw {
        match stmt {
            RawStmt::Qubits(_, pos) => {
                return Err(static_err(
                    StaticRule::MisplacedQubits,
                    pos,
                    "`qubits` must be the first statement of the circuit block",
                ))
            }
            RawStmt::Repeat {
                var,
                start,
                end,
                body,
                pos,
            } => {
                if depth + 1 > MAX_NESTING {
                    return Err(static_err(
                        StaticRule::NestingTooDeep,
                        pos,
                        format!("loops nest deeper than {MAX_NESTING}"),
                    ));
                }
                check_expr(&start, scope)?;
                check_expr(&end, scope)?;
                if scope.contains(&var) {
                    return Err(static_err(
                        StaticRule::ShadowedName,
                        pos,
                        format!("loop variable `{var}` shadows an existing name"),
                    ));
                }
                scope.loops.push(var.clone());
                let body = check_body(body, scope, depth + 1)?;
                scope.loops.pop();
                out.push(Statement::Repeat {
                    var,
                    start,
                    end,
                    body,
                    pos,
                });
            }
            RawStmt::Stmt(stmt) => {
                match &stmt {
                    Statement::Gate {
                        kind,
                        angle,
                        targets,
                        pos,
                    } => {
                        if targets.len() != kind.arity() {
                            return Err(static_err(
                                StaticRule::WrongArity,
                                *pos,
                                format!(
                                    "`{kind}` takes {} qubit(s), found {}",
                                    kind.arity(),
                                    targets.len()
                                ),
                            ));
                        }
                        if kind.takes_angle() != angle.is_some() {
                            return Err(static_err(
                                StaticRule::AngleMismatch,
                                *pos,
                                if kind.takes_angle() {
                                    format!("`{kind}` requires an angle, e.g. `{kind}(pi/2) 0`")
                                } else {
                                    format!("`{kind}` does not take an angle")
                                },
                            ));
                        }
                        for e in angle.iter().chain(targets) {
                            check_expr(e, scope)?;
                        }
                    }
                    Statement::Measure { targets, pos } => {
                        if depth > 0 {
                            return Err(static_err(
                                StaticRule::MeasureInLoop,
                                *pos,
                                "measure cannot appear inside a loop",
                            ));
                        }
                        if let MeasureTargets::Qubits(qs) = targets {
                            for e in qs {
                                check_expr(e, scope)?;
                            }
                        }
                    }
                    Statement::Repeat { .. } => unreachable!("raw repeats are separate"),
                }
                out.push(stmt);
            }
        }
    }
    Ok(out)
}

fn check(raw: RawFunction) -> PResult<FunctionDef> {
    let mut seen: Vec<&str> = Vec::new();
    for (p, pos) in &raw.params {
        if seen.contains(&p.name.as_str()) {
            return Err(static_err(
                StaticRule::DuplicateParam,
                *pos,
                format!("parameter `{}` declared twice", p.name),
            ));
        }
        seen.push(&p.name);
        if let (Some(lo), Some(hi)) = (p.min, p.max) {
            if lo > hi {
                return Err(static_err(
                    StaticRule::InvalidParamBounds,
                    *pos,
                    format!("min {lo} exceeds max {hi}"),
                ));
            }
        }
        if let Some(d) = p.default {
            if !p.in_range(d) {
                return Err(static_err(
                    StaticRule::DefaultOutOfRange,
                    *pos,
                    format!("default {d} outside declared bounds"),
                ));
            }
        }
    }

    let (mut raw_stmts, circuit_pos) = raw.circuit.ok_or_else(|| {
        static_err(StaticRule::MissingCircuit, raw.name_pos, "function has no `circuit` block")
    })?;

    let qubits_expr = match raw_stmts.first() {
        Some(RawStmt::Qubits(..)) => match raw_stmts.remove(0) {
            RawStmt::Qubits(e, _) => e,
            _ => unreachable!(),
        },
        _ => {
            return Err(static_err(
                StaticRule::MissingQubits,
                circuit_pos,
                "circuit block must start with `qubits <expr>`",
            ))
        }
    };

    let params: Vec<ParamDecl> = raw.params.into_iter().map(|(p, _)| p).collect();
    let mut scope = Scope {
        params: params.iter().map(|p| p.name.as_str()).collect(),
        loops: Vec::new(),
    };
    check_expr(&qubits_expr, &scope)?;
    let statements = check_body(raw_stmts, &mut scope, 0)?;

    let measures: Vec<(usize, Pos)> = statements
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match s {
            Statement::Measure { pos, .. } => Some((i, *pos)),
            _ => None,
        })
        .collect();
    match measures.as_slice() {
        [] => {
            return Err(static_err(
                StaticRule::MissingMeasure,
                circuit_pos,
                "circuit block must end with a `measure` statement",
            ))
        }
        [_, (_, second), ..] => {
            return Err(static_err(
                StaticRule::DuplicateMeasure,
                *second,
                "circuit block has more than one `measure` statement",
            ))
        }
        [(i, pos)] if *i + 1 != statements.len() => {
            return Err(static_err(
                StaticRule::MeasureNotLast,
                *pos,
                "`measure` must be the last statement of the circuit block",
            ))
        }
        _ => {}
    }

    let post_scope = Scope {
        params: params.iter().map(|p| p.name.as_str()).collect(),
        loops: Vec::new(),
    };
    for step in &raw.post {
        if let PostStep::Mod(e) = step {
            check_expr(e, &post_scope)?;
        }
    }

    Ok(FunctionDef {
        name: raw.name,
        template: raw.template.unwrap_or(Template::Qiskit),
        params,
        circuit_template: TemplateBlock {
            qubits_expr,
            statements,
        },
        post_pipeline: raw.post,
    })
}
