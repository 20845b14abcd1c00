//! Stochastic HYPE models: domain types, structural queries and validation.
//!
//! A model is a controlled system `Σ ⋈_L init.Con` together with its
//! variables, influence names (`iv`), influence types, named constants and
//! one event condition per event. Events are either instantaneous (urgent,
//! fired by a guard) or stochastic (fired after an exponential delay whose
//! rate may depend on the continuous state).

mod controller;
pub mod expr;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use controller::{canonical, derivative_set, successors, ControllerStateError};
pub use expr::{BinOp, CmpOp, EvalError, Expr, IndexedExpr, Type, Valuation, Value};
pub use validate::{validate, Violation, ViolationKind};

/// The event that selects initial modes and the initial point.
pub const INIT_EVENT: &str = "init";

/// Location of a construct in source text.
///
/// Spans never take part in structural equality: two models that differ only
/// in where things were written compare equal.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Instantaneous,
    Stochastic,
}

/// `I(W)`: an influence type applied to actual variable arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeInstance {
    pub name: String,
    pub args: Vec<String>,
}

impl fmt::Display for TypeInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(", "))?;
        }
        Ok(())
    }
}

/// An activity `(ι, r, I(W))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Influence {
    pub name: String,
    /// Strength; may mention named constants but no variables.
    pub strength: Expr,
    pub itype: TypeInstance,
}

impl fmt::Display for Influence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.name, self.strength, self.itype)
    }
}

/// One summand `a:α.S` of a subcomponent.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub event: String,
    pub influence: Influence,
    pub target: String,
    pub target_args: Vec<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subcomponent {
    pub name: String,
    pub params: Vec<String>,
    pub branches: Vec<Branch>,
    pub span: Span,
}

impl Subcomponent {
    /// `is(S)`: distinct influences in order of first occurrence.
    pub fn influences(&self) -> Vec<Influence> {
        let mut out: Vec<Influence> = Vec::new();
        for b in &self.branches {
            if !out.contains(&b.influence) {
                out.push(b.influence.clone());
            }
        }
        out
    }

    /// `ev(S)`: distinct non-init events in order of first occurrence.
    pub fn events(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for b in &self.branches {
            if b.event != INIT_EVENT && !out.contains(&b.event) {
                out.push(b.event.clone());
            }
        }
        out
    }

    pub fn init_branch(&self) -> Option<&Branch> {
        self.branches.iter().find(|b| b.event == INIT_EVENT)
    }
}

/// `is(S)`.
pub fn influences_of(s: &Subcomponent) -> Vec<Influence> {
    s.influences()
}

/// `ev(S)`.
pub fn events_of(s: &Subcomponent) -> Vec<String> {
    s.events()
}

/// Binary composition tree `P ⋈_L P` with named leaves.
#[derive(Debug, Clone, PartialEq)]
pub enum CompositionTree {
    Leaf {
        name: String,
        args: Vec<String>,
        span: Span,
    },
    Sync {
        left: Box<CompositionTree>,
        right: Box<CompositionTree>,
        events: BTreeSet<String>,
        span: Span,
    },
}

impl CompositionTree {
    pub fn span(&self) -> Span {
        match self {
            CompositionTree::Leaf { span, .. } | CompositionTree::Sync { span, .. } => *span,
        }
    }

    pub fn leaves(&self) -> Vec<&CompositionTree> {
        match self {
            CompositionTree::Leaf { .. } => vec![self],
            CompositionTree::Sync { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
        }
    }
}

/// Sequential controller term `M ::= a.M | 0 | M + M | Name`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CtrlTerm {
    Nil,
    Prefix(String, Box<CtrlTerm>),
    Sum(Box<CtrlTerm>, Box<CtrlTerm>),
    Name(String),
}

impl CtrlTerm {
    pub fn prefix(event: impl Into<String>, next: CtrlTerm) -> Self {
        CtrlTerm::Prefix(event.into(), Box::new(next))
    }

    pub fn name(n: impl Into<String>) -> Self {
        CtrlTerm::Name(n.into())
    }

    pub fn sum(a: CtrlTerm, b: CtrlTerm) -> Self {
        CtrlTerm::Sum(Box::new(a), Box::new(b))
    }

    pub fn events(&self, out: &mut BTreeSet<String>) {
        match self {
            CtrlTerm::Nil | CtrlTerm::Name(_) => {}
            CtrlTerm::Prefix(a, m) => {
                out.insert(a.clone());
                m.events(out);
            }
            CtrlTerm::Sum(a, b) => {
                a.events(out);
                b.events(out);
            }
        }
    }

    pub fn names(&self, out: &mut BTreeSet<String>) {
        match self {
            CtrlTerm::Nil => {}
            CtrlTerm::Name(n) => {
                out.insert(n.clone());
            }
            CtrlTerm::Prefix(_, m) => m.names(out),
            CtrlTerm::Sum(a, b) => {
                a.names(out);
                b.names(out);
            }
        }
    }
}

impl fmt::Display for CtrlTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CtrlTerm::Nil => f.write_str("0"),
            CtrlTerm::Name(n) => f.write_str(n),
            CtrlTerm::Prefix(a, m) => {
                write!(f, "{a}.")?;
                if matches!(**m, CtrlTerm::Sum(..)) {
                    write!(f, "({m})")
                } else {
                    write!(f, "{m}")
                }
            }
            CtrlTerm::Sum(a, b) => {
                if matches!(**b, CtrlTerm::Sum(..)) {
                    write!(f, "{a} + ({b})")
                } else {
                    write!(f, "{a} + {b}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerBody {
    Sequential(CtrlTerm),
    Composite(CompositionTree),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerDef {
    pub name: String,
    pub body: ControllerBody,
    pub span: Span,
}

/// Named composition of subcomponents (a HYPE component).
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDef {
    pub name: String,
    pub tree: CompositionTree,
    pub span: Span,
}

/// Influence-type definition `⟦I(params)⟧ = body`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceType {
    pub name: String,
    pub params: Vec<String>,
    pub body: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub var: String,
    pub value: Expr,
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}' = {}", self.var, self.value)
    }
}

/// `ec(a) = (activation, reset)`. An empty reset is the identity reset `true`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCondition {
    pub kind: EventKind,
    /// Boolean guard for instantaneous events, non-negative rate for stochastic ones.
    pub activation: Expr,
    pub reset: Vec<Assignment>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    pub name: String,
    pub value: f64,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declared {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceVar {
    pub influence: String,
    pub variable: String,
    pub span: Span,
}

/// `Σ ⋈_L init.Con`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledSystem {
    pub name: String,
    pub uncontrolled: CompositionTree,
    pub sync: BTreeSet<String>,
    pub controller: CompositionTree,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypeModel {
    pub name: String,
    pub variables: Vec<Declared>,
    pub constants: Vec<Constant>,
    pub types: Vec<InfluenceType>,
    pub influence_vars: Vec<InfluenceVar>,
    pub subcomponents: Vec<Subcomponent>,
    pub components: Vec<ComponentDef>,
    pub controllers: Vec<ControllerDef>,
    pub system: ControlledSystem,
    /// Event conditions keyed by event name, in declaration order. Their keys
    /// are the event set `E = E_d ⊎ E_s`.
    pub conditions: Vec<(String, EventCondition)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OverrideError {
    #[error("`{0}` is not a declared constant")]
    UnknownConstant(String),
}

impl HypeModel {
    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.value)
    }

    /// Replaces the value of a declared constant.
    pub fn set_constant(&mut self, name: &str, value: f64) -> Result<(), OverrideError> {
        match self.constants.iter_mut().find(|c| c.name == name) {
            Some(c) => {
                c.value = value;
                Ok(())
            }
            None => Err(OverrideError::UnknownConstant(name.to_owned())),
        }
    }

    /// Substitutes named constants by their values.
    pub fn inline_constants(&self, e: &Expr) -> Expr {
        e.substitute(&|n| self.constant(n).map(Expr::Num))
    }

    pub fn condition(&self, event: &str) -> Option<&EventCondition> {
        self.conditions
            .iter()
            .find(|(e, _)| e == event)
            .map(|(_, c)| c)
    }

    pub fn event_kind(&self, event: &str) -> Option<EventKind> {
        self.condition(event).map(|c| c.kind)
    }

    pub fn events(&self) -> BTreeSet<String> {
        self.conditions.iter().map(|(e, _)| e.clone()).collect()
    }

    /// `(E_d, E_s)`.
    pub fn events_by_kind(&self) -> (BTreeSet<String>, BTreeSet<String>) {
        let mut inst = BTreeSet::new();
        let mut stoch = BTreeSet::new();
        for (e, c) in &self.conditions {
            match c.kind {
                EventKind::Instantaneous => inst.insert(e.clone()),
                EventKind::Stochastic => stoch.insert(e.clone()),
            };
        }
        (inst, stoch)
    }

    pub fn subcomponent(&self, name: &str) -> Option<&Subcomponent> {
        self.subcomponents.iter().find(|s| s.name == name)
    }

    pub fn component(&self, name: &str) -> Option<&ComponentDef> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn controller(&self, name: &str) -> Option<&ControllerDef> {
        self.controllers.iter().find(|c| c.name == name)
    }

    pub fn influence_type(&self, name: &str) -> Option<&InfluenceType> {
        self.types.iter().find(|t| t.name == name)
    }

    /// `iv(ι)`.
    pub fn variable_of(&self, influence: &str) -> Option<&str> {
        self.influence_vars
            .iter()
            .find(|iv| iv.influence == influence)
            .map(|iv| iv.variable.as_str())
    }

    pub fn sequential_controllers(&self) -> impl Iterator<Item = (&str, &CtrlTerm)> {
        self.controllers.iter().filter_map(|c| match &c.body {
            ControllerBody::Sequential(t) => Some((c.name.as_str(), t)),
            ControllerBody::Composite(_) => None,
        })
    }

    /// Sequential-controller bodies by name.
    pub fn controller_bodies(&self) -> BTreeMap<String, CtrlTerm> {
        self.sequential_controllers()
            .map(|(n, t)| (n.to_owned(), t.clone()))
            .collect()
    }

    /// Events a node of the uncontrolled tree can take part in (`init` included).
    pub fn uncontrolled_events(&self, tree: &CompositionTree) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_uncontrolled_events(tree, &mut out, 0);
        out
    }

    fn collect_uncontrolled_events(
        &self,
        tree: &CompositionTree,
        out: &mut BTreeSet<String>,
        depth: usize,
    ) {
        if depth > 64 {
            return;
        }
        match tree {
            CompositionTree::Leaf { name, .. } => {
                if let Some(s) = self.subcomponent(name) {
                    out.extend(s.branches.iter().map(|b| b.event.clone()));
                } else if let Some(c) = self.component(name) {
                    self.collect_uncontrolled_events(&c.tree, out, depth + 1);
                }
            }
            CompositionTree::Sync { left, right, .. } => {
                self.collect_uncontrolled_events(left, out, depth);
                self.collect_uncontrolled_events(right, out, depth);
            }
        }
    }

    /// Events a node of the controller tree can take part in.
    pub fn controller_events(&self, tree: &CompositionTree) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_controller_events(tree, &mut out, 0);
        out
    }

    fn collect_controller_events(
        &self,
        tree: &CompositionTree,
        out: &mut BTreeSet<String>,
        depth: usize,
    ) {
        if depth > 64 {
            return;
        }
        match tree {
            CompositionTree::Leaf { name, .. } => match self.controller(name).map(|c| &c.body) {
                Some(ControllerBody::Composite(t)) => {
                    self.collect_controller_events(t, out, depth + 1)
                }
                Some(ControllerBody::Sequential(_)) => {
                    // follow named references to other sequential controllers
                    let mut seen = BTreeSet::new();
                    let mut stack = vec![name.clone()];
                    while let Some(n) = stack.pop() {
                        if !seen.insert(n.clone()) {
                            continue;
                        }
                        if let Some(ControllerBody::Sequential(t)) =
                            self.controller(&n).map(|c| &c.body)
                        {
                            t.events(out);
                            let mut names = BTreeSet::new();
                            t.names(&mut names);
                            stack.extend(names);
                        }
                    }
                }
                None => {}
            },
            CompositionTree::Sync { left, right, .. } => {
                self.collect_controller_events(left, out, depth);
                self.collect_controller_events(right, out, depth);
            }
        }
    }
}
