//! Concrete syntax for stochastic HYPE models (`.hype` files).
//!
//! See `docs/syntax.md` for the grammar. Parsing recovers at `;` so one run
//! reports every independent syntax error it can find.

mod lexer;
mod printer;

use std::collections::BTreeSet;
use std::fmt;

use crate::model::{
    validate, Assignment, BinOp, Branch, CmpOp, ComponentDef, CompositionTree, Constant,
    ControlledSystem, ControllerBody, ControllerDef, CtrlTerm, Declared, EventCondition, EventKind,
    Expr, HypeModel, Influence, InfluenceType, InfluenceVar, Span, Subcomponent, TypeInstance,
    INIT_EVENT,
};

use lexer::{lex, Tok, Token};
pub use printer::pretty_print;

const RESERVED: &[&str] = &[
    "true", "false", "and", "or", "not", "if", "then", "else", "min", "max", "pow", "sync",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: Option<String>,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl SourceSpan {
    fn new(file: Option<&str>, s: Span) -> Self {
        SourceSpan {
            file: file.map(str::to_owned),
            line: s.line.max(1),
            column: s.column.max(1),
            length: s.length,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// Parses and validates a model; validation violations are returned as errors.
pub fn parse_model(text: &str) -> Result<HypeModel, Vec<ParseError>> {
    parse_model_in(text, None)
}

/// Like [`parse_model`], tagging every error span with `file`.
pub fn parse_model_in(text: &str, file: Option<&str>) -> Result<HypeModel, Vec<ParseError>> {
    let model = parse_syntax_in(text, file)?;
    let violations = validate(&model);
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(violations
            .into_iter()
            .map(|v| ParseError {
                span: SourceSpan::new(file, v.span),
                message: v.message,
                expected: vec![],
            })
            .collect())
    }
}

/// Parses without running model validation.
pub fn parse_syntax(text: &str) -> Result<HypeModel, Vec<ParseError>> {
    parse_syntax_in(text, None)
}

pub fn parse_syntax_in(text: &str, file: Option<&str>) -> Result<HypeModel, Vec<ParseError>> {
    let (toks, lex_errs) = lex(text);
    let mut p = Parser {
        toks,
        pos: 0,
        file,
        errors: lex_errs
            .into_iter()
            .map(|e| ParseError {
                span: SourceSpan::new(file, e.span),
                message: e.message,
                expected: vec![],
            })
            .collect(),
        uses: Vec::new(),
        parts: Parts::default(),
    };
    let model = p.model();
    if p.errors.is_empty() {
        model.ok_or_else(Vec::new)
    } else {
        Err(p.errors)
    }
}

#[derive(Default)]
struct Parts {
    name: Option<String>,
    variables: Vec<Declared>,
    constants: Vec<Constant>,
    types: Vec<InfluenceType>,
    ivs: Vec<InfluenceVar>,
    subcomponents: Vec<Subcomponent>,
    components: Vec<ComponentDef>,
    controllers: Vec<ControllerDef>,
    system: Option<ControlledSystem>,
    conditions: Vec<(String, EventCondition)>,
}

type PResult<T> = Result<T, ParseError>;

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file: Option<&'a str>,
    errors: Vec<ParseError>,
    /// Every event occurrence: name, written with `~`, location.
    uses: Vec<(String, bool, Span)>,
    parts: Parts,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>, expected: &[&str]) -> ParseError {
        ParseError {
            span: SourceSpan::new(self.file, self.span()),
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        self.error_here(format!("unexpected {}", self.peek().describe()), expected)
    }

    fn expect(&mut self, t: Tok) -> PResult<Span> {
        if *self.peek() == t {
            Ok(self.bump().span)
        } else {
            let sym = format!("`{}`", t.symbol());
            Err(self.unexpected(&[&sym]))
        }
    }

    fn eat(&mut self, t: Tok) -> bool {
        if *self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.bump().span)
        } else {
            let k = format!("`{kw}`");
            Err(self.unexpected(&[&k]))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let sp = self.bump().span;
                Ok((s, sp))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn ident_list(&mut self, close: Tok) -> PResult<Vec<String>> {
        let mut out = Vec::new();
        if *self.peek() == close {
            return Ok(out);
        }
        loop {
            out.push(self.ident()?.0);
            if !self.eat(Tok::Comma) {
                break;
            }
        }
        Ok(out)
    }

    fn opt_args(&mut self) -> PResult<Vec<String>> {
        if self.eat(Tok::LParen) {
            let args = self.ident_list(Tok::RParen)?;
            self.expect(Tok::RParen)?;
            Ok(args)
        } else {
            Ok(Vec::new())
        }
    }

    /// Event occurrence, optionally marked stochastic with `~`.
    fn event(&mut self) -> PResult<String> {
        let start = self.span();
        let stochastic = self.eat(Tok::Tilde);
        let (name, sp) = self.ident()?;
        let span = if stochastic {
            Span {
                length: sp.length + 1,
                ..start
            }
        } else {
            sp
        };
        self.uses.push((name.clone(), stochastic, span));
        Ok(name)
    }

    fn skip_to_semi(&mut self) {
        while !matches!(self.peek(), Tok::Semi | Tok::Eof) {
            self.bump();
        }
        self.eat(Tok::Semi);
    }

    fn model(&mut self) -> Option<HypeModel> {
        if !self.is_kw("model") {
            let e = self.error_here("expected model header", &["`model`"]);
            self.errors.push(e);
            return None;
        }
        let header = (|| -> PResult<String> {
            self.bump();
            let (name, _) = self.ident()?;
            self.expect(Tok::Semi)?;
            Ok(name)
        })();
        match header {
            Ok(n) => self.parts.name = Some(n),
            Err(e) => {
                self.errors.push(e);
                self.skip_to_semi();
            }
        }
        while *self.peek() != Tok::Eof {
            if let Err(e) = self.item() {
                self.errors.push(e);
                self.skip_to_semi();
            }
        }
        self.check_sigils();
        let parts = std::mem::take(&mut self.parts);
        let Some(system) = parts.system else {
            let e = self.error_here("missing system definition", &["`system`"]);
            self.errors.push(e);
            return None;
        };
        Some(HypeModel {
            name: parts.name.unwrap_or_default(),
            variables: parts.variables,
            constants: parts.constants,
            types: parts.types,
            influence_vars: parts.ivs,
            subcomponents: parts.subcomponents,
            components: parts.components,
            controllers: parts.controllers,
            system,
            conditions: parts.conditions,
        })
    }

    fn check_sigils(&mut self) {
        for (name, stochastic, span) in std::mem::take(&mut self.uses) {
            let kind = self
                .parts
                .conditions
                .iter()
                .find(|(e, _)| *e == name)
                .map(|(_, c)| c.kind);
            let msg = match (kind, stochastic) {
                (Some(EventKind::Stochastic), false) => {
                    format!("event `{name}` is stochastic and must be written `~{name}`")
                }
                (Some(EventKind::Instantaneous), true) => {
                    format!("event `{name}` is instantaneous and must be written without `~`")
                }
                _ => continue,
            };
            self.errors.push(ParseError {
                span: SourceSpan::new(self.file, span),
                message: msg,
                expected: vec![],
            });
        }
    }

    fn item(&mut self) -> PResult<()> {
        let kw = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => {
                return Err(self.unexpected(&[
                    "`var`",
                    "`const`",
                    "`type`",
                    "`iv`",
                    "`subcomponent`",
                    "`component`",
                    "`controller`",
                    "`system`",
                    "`ec`",
                ]))
            }
        };
        match kw.as_str() {
            "var" => self.var_decl(),
            "const" => self.const_decl(),
            "type" => self.type_decl(),
            "iv" => self.iv_decl(),
            "subcomponent" => self.subcomponent(),
            "component" => self.component(),
            "controller" => self.controller(),
            "system" => self.system(),
            "ec" => self.event_condition(),
            other => Err(self.error_here(
                format!("unknown declaration `{other}`"),
                &[
                    "`var`",
                    "`const`",
                    "`type`",
                    "`iv`",
                    "`subcomponent`",
                    "`component`",
                    "`controller`",
                    "`system`",
                    "`ec`",
                ],
            )),
        }
    }

    fn var_decl(&mut self) -> PResult<()> {
        self.bump();
        loop {
            let (name, span) = self.ident()?;
            self.parts.variables.push(Declared { name, span });
            if !self.eat(Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::Semi)?;
        Ok(())
    }

    fn const_decl(&mut self) -> PResult<()> {
        self.bump();
        let (name, span) = self.ident()?;
        self.expect(Tok::Eq)?;
        let neg = self.eat(Tok::Minus);
        let value = match self.peek() {
            Tok::Number(v) => {
                let v = *v;
                self.bump();
                if neg {
                    -v
                } else {
                    v
                }
            }
            _ => return Err(self.unexpected(&["number"])),
        };
        self.expect(Tok::Semi)?;
        self.parts.constants.push(Constant { name, value, span });
        Ok(())
    }

    fn type_decl(&mut self) -> PResult<()> {
        self.bump();
        let (name, span) = self.ident()?;
        let params = self.opt_args()?;
        self.expect(Tok::Eq)?;
        let body = self.expr()?;
        self.expect(Tok::Semi)?;
        self.parts.types.push(InfluenceType {
            name,
            params,
            body,
            span,
        });
        Ok(())
    }

    fn iv_decl(&mut self) -> PResult<()> {
        let span = self.bump().span;
        self.expect(Tok::LParen)?;
        let (influence, _) = self.ident()?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::Eq)?;
        let (variable, _) = self.ident()?;
        self.expect(Tok::Semi)?;
        self.parts.ivs.push(InfluenceVar {
            influence,
            variable,
            span,
        });
        Ok(())
    }

    fn subcomponent(&mut self) -> PResult<()> {
        self.bump();
        let (name, span) = self.ident()?;
        let params = self.opt_args()?;
        self.expect(Tok::Eq)?;
        let mut branches = vec![self.branch()?];
        while self.eat(Tok::Plus) {
            branches.push(self.branch()?);
        }
        self.expect(Tok::Semi)?;
        self.parts.subcomponents.push(Subcomponent {
            name,
            params,
            branches,
            span,
        });
        Ok(())
    }

    fn branch(&mut self) -> PResult<Branch> {
        let span = self.span();
        let event = self.event()?;
        self.expect(Tok::Colon)?;
        self.expect(Tok::LParen)?;
        let (iname, _) = self.ident()?;
        self.expect(Tok::Comma)?;
        let strength = self.expr()?;
        self.expect(Tok::Comma)?;
        let (tname, _) = self.ident()?;
        let targs = self.opt_args()?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::Dot)?;
        let (target, _) = self.ident()?;
        let target_args = self.opt_args()?;
        Ok(Branch {
            event,
            influence: Influence {
                name: iname,
                strength,
                itype: TypeInstance {
                    name: tname,
                    args: targs,
                },
            },
            target,
            target_args,
            span,
        })
    }

    fn sync_set(&mut self) -> PResult<BTreeSet<String>> {
        self.expect_kw("sync")?;
        self.expect(Tok::LBrace)?;
        let mut out = BTreeSet::new();
        if *self.peek() != Tok::RBrace {
            loop {
                out.insert(self.event()?);
                if !self.eat(Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(out)
    }

    /// `leaf (sync{..} leaf)*`, left-associative.
    fn tree(&mut self) -> PResult<CompositionTree> {
        let mut left = self.tree_leaf()?;
        while self.is_kw("sync") {
            let span = self.span();
            let events = self.sync_set()?;
            let right = self.tree_leaf()?;
            left = CompositionTree::Sync {
                left: Box::new(left),
                right: Box::new(right),
                events,
                span,
            };
        }
        Ok(left)
    }

    fn tree_leaf(&mut self) -> PResult<CompositionTree> {
        if self.eat(Tok::LParen) {
            let t = self.tree()?;
            self.expect(Tok::RParen)?;
            return Ok(t);
        }
        let (name, span) = self.ident()?;
        let args = self.opt_args()?;
        Ok(CompositionTree::Leaf { name, args, span })
    }

    fn component(&mut self) -> PResult<()> {
        self.bump();
        let (name, span) = self.ident()?;
        self.expect(Tok::Eq)?;
        let tree = self.tree()?;
        self.expect(Tok::Semi)?;
        self.parts
            .components
            .push(ComponentDef { name, tree, span });
        Ok(())
    }

    fn controller(&mut self) -> PResult<()> {
        self.bump();
        let (name, span) = self.ident()?;
        self.expect(Tok::Eq)?;
        let body = self.controller_body()?;
        self.expect(Tok::Semi)?;
        self.parts
            .controllers
            .push(ControllerDef { name, body, span });
        Ok(())
    }

    /// A sequential term, or a `sync` composition of controller names.
    fn controller_body(&mut self) -> PResult<ControllerBody> {
        let first_span = self.span();
        let first = self.ctrl_sum()?;
        if !self.is_kw("sync") {
            return Ok(ControllerBody::Sequential(first));
        }
        let mut tree = Self::ctrl_leaf(first, first_span, self.file)?;
        while self.is_kw("sync") {
            let span = self.span();
            let events = self.sync_set()?;
            let rspan = self.span();
            let right = if *self.peek() == Tok::LParen {
                self.bump();
                let body = self.controller_body()?;
                self.expect(Tok::RParen)?;
                match body {
                    ControllerBody::Composite(t) => t,
                    ControllerBody::Sequential(t) => Self::ctrl_leaf(t, rspan, self.file)?,
                }
            } else {
                let t = self.ctrl_prefix()?;
                Self::ctrl_leaf(t, rspan, self.file)?
            };
            tree = CompositionTree::Sync {
                left: Box::new(tree),
                right: Box::new(right),
                events,
                span,
            };
        }
        Ok(ControllerBody::Composite(tree))
    }

    fn ctrl_leaf(t: CtrlTerm, span: Span, file: Option<&str>) -> PResult<CompositionTree> {
        match t {
            CtrlTerm::Name(name) => Ok(CompositionTree::Leaf {
                name,
                args: vec![],
                span,
            }),
            _ => Err(ParseError {
                span: SourceSpan::new(file, span),
                message: "operands of a controller `sync` must be controller names".into(),
                expected: vec!["controller name".into()],
            }),
        }
    }

    fn ctrl_sum(&mut self) -> PResult<CtrlTerm> {
        let mut t = self.ctrl_prefix()?;
        while self.eat(Tok::Plus) {
            let r = self.ctrl_prefix()?;
            t = CtrlTerm::sum(t, r);
        }
        Ok(t)
    }

    fn ctrl_prefix(&mut self) -> PResult<CtrlTerm> {
        match self.peek().clone() {
            Tok::Number(0.0) => {
                self.bump();
                Ok(CtrlTerm::Nil)
            }
            Tok::LParen => {
                self.bump();
                let t = self.ctrl_sum()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Tilde => {
                let e = self.event()?;
                self.expect(Tok::Dot)?;
                Ok(CtrlTerm::prefix(e, self.ctrl_prefix()?))
            }
            Tok::Ident(_) => {
                if *self.peek_at(1) == Tok::Dot {
                    let e = self.event()?;
                    self.bump();
                    Ok(CtrlTerm::prefix(e, self.ctrl_prefix()?))
                } else {
                    Ok(CtrlTerm::Name(self.ident()?.0))
                }
            }
            _ => Err(self.unexpected(&["event prefix", "controller name", "`0`", "`(`"])),
        }
    }

    fn system(&mut self) -> PResult<()> {
        let kw_span = self.bump().span;
        let (name, _) = self.ident()?;
        self.expect(Tok::Eq)?;
        let uncontrolled = self.tree_leaf_chain_until_init()?;
        let (sync, span) = match uncontrolled.1 {
            Some(s) => s,
            None => {
                return Err(self.error_here(
                    "expected `sync{..} init.` before the controller",
                    &["`sync`"],
                ))
            }
        };
        let (init, _) = self.ident_any()?;
        if init != INIT_EVENT {
            return Err(self.error_here("the controller must be prefixed by `init.`", &["`init`"]));
        }
        self.uses.push((INIT_EVENT.into(), false, span));
        self.expect(Tok::Dot)?;
        let controller = self.tree_leaf()?;
        self.expect(Tok::Semi)?;
        if self.parts.system.is_some() {
            return Err(ParseError {
                span: SourceSpan::new(self.file, kw_span),
                message: "duplicate system definition".into(),
                expected: vec![],
            });
        }
        self.parts.system = Some(ControlledSystem {
            name,
            uncontrolled: uncontrolled.0,
            sync,
            controller,
            span: kw_span,
        });
        Ok(())
    }

    /// Parses `Σ sync{L}` where the final `sync` is followed by `init.`.
    #[allow(clippy::type_complexity)]
    fn tree_leaf_chain_until_init(
        &mut self,
    ) -> PResult<(CompositionTree, Option<(BTreeSet<String>, Span)>)> {
        let mut left = self.tree_leaf()?;
        while self.is_kw("sync") {
            let span = self.span();
            let events = self.sync_set()?;
            if self.is_kw(INIT_EVENT) && *self.peek_at(1) == Tok::Dot {
                return Ok((left, Some((events, span))));
            }
            let right = self.tree_leaf()?;
            left = CompositionTree::Sync {
                left: Box::new(left),
                right: Box::new(right),
                events,
                span,
            };
        }
        Ok((left, None))
    }

    fn ident_any(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.bump().span)),
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn event_condition(&mut self) -> PResult<()> {
        let span = self.bump().span;
        self.expect(Tok::LParen)?;
        let stochastic = self.eat(Tok::Tilde);
        let (event, _) = self.ident()?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::Eq)?;
        self.expect(Tok::LParen)?;
        let activation = self.expr()?;
        self.expect(Tok::Comma)?;
        let reset = self.reset()?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::Semi)?;
        let kind = if stochastic {
            EventKind::Stochastic
        } else {
            EventKind::Instantaneous
        };
        self.parts.conditions.push((
            event,
            EventCondition {
                kind,
                activation,
                reset,
                span,
            },
        ));
        Ok(())
    }

    fn reset(&mut self) -> PResult<Vec<Assignment>> {
        if self.is_kw("true") {
            self.bump();
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        loop {
            let (var, _) = self.ident()?;
            self.expect(Tok::Prime)?;
            self.expect(Tok::Eq)?;
            let value = self.additive()?;
            out.push(Assignment { var, value });
            if !self.is_kw("and") {
                break;
            }
            self.bump();
        }
        Ok(out)
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        if self.is_kw("if") {
            self.bump();
            let c = self.expr()?;
            self.expect_kw("then")?;
            let t = self.expr()?;
            self.expect_kw("else")?;
            let e = self.expr()?;
            return Ok(Expr::If(Box::new(c), Box::new(t), Box::new(e)));
        }
        self.or()
    }

    fn or(&mut self) -> PResult<Expr> {
        let mut e = self.and()?;
        while self.is_kw("or") {
            self.bump();
            let r = self.and()?;
            e = Expr::Or(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut e = self.not()?;
        while self.is_kw("and") {
            self.bump();
            let r = self.not()?;
            e = Expr::And(Box::new(e), Box::new(r));
        }
        Ok(e)
    }

    fn not(&mut self) -> PResult<Expr> {
        if self.is_kw("not") {
            self.bump();
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let l = self.additive()?;
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Eq => CmpOp::Eq,
            Tok::Ge => CmpOp::Ge,
            Tok::Gt => CmpOp::Gt,
            _ => return Ok(l),
        };
        self.bump();
        let r = self.additive()?;
        Ok(Expr::cmp(op, l, r))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut e = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(e),
            };
            self.bump();
            let r = self.multiplicative()?;
            e = Expr::binary(op, e, r);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(e),
            };
            self.bump();
            let r = self.unary()?;
            e = Expr::binary(op, e, r);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(Tok::Minus) {
            if let Tok::Number(v) = *self.peek() {
                self.bump();
                return Ok(Expr::Num(-v));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) => match s.as_str() {
                "true" | "false" => {
                    self.bump();
                    Ok(Expr::Bool(s == "true"))
                }
                "min" | "max" | "pow" => {
                    self.bump();
                    let op = match s.as_str() {
                        "min" => BinOp::Min,
                        "max" => BinOp::Max,
                        _ => BinOp::Pow,
                    };
                    self.expect(Tok::LParen)?;
                    let a = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let b = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::binary(op, a, b))
                }
                "if" => self.expr(),
                _ => Ok(Expr::Var(self.ident()?.0)),
            },
            _ => Err(self.unexpected(&["expression"])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
model small;
var K;
const k2 = 250;
type const = 1;
iv(h) = K;
subcomponent Heat = on:(h, 5, const).Heat + init:(h, 0, const).Heat;
controller Con = on.Con;
system S = Heat sync{init, on} init.Con;
ec(init) = (true, K' = 300);
ec(on) = (K <= k2, true);
"#;

    #[test]
    fn parses_instantaneous_condition() {
        let m = parse_model(SMALL).unwrap();
        let c = m.condition("on").unwrap();
        assert_eq!(c.kind, EventKind::Instantaneous);
        assert_eq!(
            c.activation,
            Expr::cmp(CmpOp::Le, Expr::var("K"), Expr::var("k2"))
        );
        assert!(c.reset.is_empty());
        assert_eq!(m.inline_constants(&c.activation).to_string(), "K <= 250");
    }

    #[test]
    fn empty_file() {
        let errs = parse_model("").unwrap_err();
        assert_eq!(errs[0].message, "expected model header");
        let errs = parse_model("  # only a comment\n").unwrap_err();
        assert_eq!(errs[0].message, "expected model header");
    }

    #[test]
    fn expression_precedence() {
        let src = SMALL.replace(
            "(K <= k2, true)",
            "(not K - 1 * 2 >= 3 and true or false, true)",
        );
        let m = parse_model(&src).unwrap();
        assert_eq!(
            m.condition("on").unwrap().activation.to_string(),
            "not K - 1 * 2 >= 3 and true or false"
        );
        let src = SMALL.replace("(K <= k2, true)", "(if K > 1 then true else K = -2, true)");
        let m = parse_model(&src).unwrap();
        assert!(matches!(
            m.condition("on").unwrap().activation,
            Expr::If(..)
        ));
    }

    #[test]
    fn sigil_mismatch_is_reported() {
        let src = SMALL.replace("controller Con = on.Con;", "controller Con = ~on.Con;");
        let errs = parse_model(&src).unwrap_err();
        assert!(errs[0].message.contains("instantaneous"), "{errs:?}");
    }

    #[test]
    fn independent_errors_are_all_reported() {
        let src =
            "model m;\nvar ;\nconst x = ;\ntype t = (;\niv(h) K;\nsystem S = A sync{} init.B;\n";
        let errs = parse_syntax(src).unwrap_err();
        let lines: BTreeSet<usize> = errs.iter().map(|e| e.span.line).collect();
        assert!(lines.len() >= 4, "{errs:?}");
    }

    #[test]
    fn missing_system() {
        let errs = parse_syntax("model m;\nvar K;\n").unwrap_err();
        assert!(errs[0].message.contains("missing system"));
    }

    #[test]
    fn error_carries_expected_set() {
        let errs = parse_syntax("model m;\nec(on) = (true true);\n").unwrap_err();
        assert_eq!(errs[0].span.line, 2);
        assert_eq!(errs[0].expected, vec!["`,`".to_string()]);
    }
}
