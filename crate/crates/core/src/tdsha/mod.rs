//! Transition-driven stochastic hybrid automata.
//!
//! A [`Tdsha`] has modes, an ordered variable list, and three kinds of
//! transitions: flows (continuous), instantaneous (guarded, weighted) and
//! stochastic (rated). Modes are referenced by index; the index of a mode in
//! a product of automata with `n2` modes in the second factor is
//! `i1 * n2 + i2`.

mod export;
mod field;
mod product;
mod prune;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Assignment, EventKind, Expr};

pub use export::{to_dot, to_json, AutomatonDocument};
pub use field::{assemble_field, CompiledField};
pub use product::{init_compatible, product, reset_compatible, reset_conflict, ResetWitness};
pub use prune::prune_unreachable;

/// Structured mode label, kept for auditing compiled automata.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLabel {
    /// Subcomponent mode `m_α`, labelled by the influence `α`.
    Influence(String),
    /// Sequential-controller state.
    Controller(String),
    Pair(Box<ModeLabel>, Box<ModeLabel>),
    /// The single mode of the unit automaton.
    Unit,
}

impl ModeLabel {
    /// Factor labels from left to right, with nested pairs flattened.
    pub fn components(&self) -> Vec<&ModeLabel> {
        match self {
            ModeLabel::Pair(a, b) => {
                let mut v = a.components();
                v.extend(b.components());
                v
            }
            other => vec![other],
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::Influence(s) => write!(f, "m{s}"),
            ModeLabel::Controller(s) => f.write_str(s),
            ModeLabel::Pair(a, b) => write!(f, "<{a} | {b}>"),
            ModeLabel::Unit => f.write_str("unit"),
        }
    }
}

/// `(q, s, f)`: in mode `q` the flow adds `s * f(X)` to `dX/dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub mode: usize,
    pub stoich: Vec<f64>,
    pub rate: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instantaneous {
    pub src: usize,
    pub tgt: usize,
    pub guard: Expr,
    pub reset: Vec<Assignment>,
    pub weight: f64,
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stochastic {
    pub src: usize,
    pub tgt: usize,
    pub guard: Expr,
    pub reset: Vec<Assignment>,
    pub rate: Expr,
    pub event: String,
}

/// Initial mode and initial point, given as assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Init {
    pub mode: usize,
    pub point: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tdsha {
    pub modes: Vec<ModeLabel>,
    pub variables: Vec<String>,
    pub flows: Vec<Flow>,
    pub instantaneous: Vec<Instantaneous>,
    pub stochastic: Vec<Stochastic>,
    pub events_d: BTreeSet<String>,
    pub events_s: BTreeSet<String>,
    pub init: Init,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TdshaError {
    #[error("synchronized events {0:?} are not shared by both automata")]
    NotShared(Vec<String>),
    #[error("event `{0}` is instantaneous in one automaton and stochastic in the other")]
    KindConflict(String),
    #[error("resets of event `{}` disagree on `{}`: {} vs {}", .0.event, .0.var, .0.left, .0.right)]
    ResetIncompatible(Box<ResetWitness>),
    #[error("initial conditions disagree on `{var}`: {left} vs {right}")]
    InitIncompatible {
        var: String,
        left: Expr,
        right: Expr,
    },
    #[error("stochastic event `{event}` has inconsistent rates {left} and {right}")]
    RateInconsistent {
        event: String,
        left: Expr,
        right: Expr,
    },
}

impl Tdsha {
    /// One mode, no variables, no transitions, no events.
    pub fn unit() -> Self {
        Tdsha {
            modes: vec![ModeLabel::Unit],
            variables: vec![],
            flows: vec![],
            instantaneous: vec![],
            stochastic: vec![],
            events_d: BTreeSet::new(),
            events_s: BTreeSet::new(),
            init: Init {
                mode: 0,
                point: vec![],
            },
        }
    }

    pub fn events(&self) -> BTreeSet<String> {
        self.events_d.union(&self.events_s).cloned().collect()
    }

    pub fn event_kind(&self, e: &str) -> Option<EventKind> {
        if self.events_d.contains(e) {
            Some(EventKind::Instantaneous)
        } else if self.events_s.contains(e) {
            Some(EventKind::Stochastic)
        } else {
            None
        }
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn flows_in(&self, mode: usize) -> impl Iterator<Item = &Flow> {
        self.flows.iter().filter(move |f| f.mode == mode)
    }

    pub fn instantaneous_from(&self, mode: usize) -> impl Iterator<Item = (usize, &Instantaneous)> {
        self.instantaneous
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.src == mode)
    }

    pub fn stochastic_from(&self, mode: usize) -> impl Iterator<Item = (usize, &Stochastic)> {
        self.stochastic
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.src == mode)
    }

    /// Checks that all stochastic transitions sharing a label carry
    /// structurally identical rates.
    pub fn check_rate_consistency(&self) -> Result<(), TdshaError> {
        let mut seen: BTreeMap<&str, &Expr> = BTreeMap::new();
        for t in &self.stochastic {
            match seen.get(t.event.as_str()) {
                Some(r) if **r != t.rate => {
                    return Err(TdshaError::RateInconsistent {
                        event: t.event.clone(),
                        left: (*r).clone(),
                        right: t.rate.clone(),
                    })
                }
                Some(_) => {}
                None => {
                    seen.insert(&t.event, &t.rate);
                }
            }
        }
        Ok(())
    }

    /// Structural sanity: endpoints in range, stoichiometry lengths, labels
    /// in the right event set, positive weights.
    pub fn check_well_formed(&self) -> Result<(), String> {
        let n = self.modes.len();
        if self.init.mode >= n {
            return Err(format!("initial mode {} out of range", self.init.mode));
        }
        for f in &self.flows {
            if f.mode >= n || f.stoich.len() != self.variables.len() {
                return Err(format!("malformed flow in mode {}", f.mode));
            }
        }
        for t in &self.instantaneous {
            if t.src >= n || t.tgt >= n {
                return Err(format!(
                    "instantaneous `{}` has an endpoint out of range",
                    t.event
                ));
            }
            if !self.events_d.contains(&t.event) {
                return Err(format!(
                    "`{}` labels an instantaneous transition but is not in E_d",
                    t.event
                ));
            }
            if t.weight.is_nan() || t.weight <= 0.0 {
                return Err(format!(
                    "instantaneous `{}` has non-positive weight",
                    t.event
                ));
            }
        }
        for t in &self.stochastic {
            if t.src >= n || t.tgt >= n {
                return Err(format!(
                    "stochastic `{}` has an endpoint out of range",
                    t.event
                ));
            }
            if !self.events_s.contains(&t.event) {
                return Err(format!(
                    "`{}` labels a stochastic transition but is not in E_s",
                    t.event
                ));
            }
        }
        if let Some(e) = self.events_d.intersection(&self.events_s).next() {
            return Err(format!("`{e}` is both instantaneous and stochastic"));
        }
        Ok(())
    }

    /// The initial point; variables the init formula leaves out are 0.
    pub fn initial_point(&self) -> Result<Vec<f64>, crate::model::EvalError> {
        let none: [(&str, f64); 0] = [];
        let mut x = vec![0.0; self.variables.len()];
        for a in &self.init.point {
            let v = a.value.eval_real(&none)?;
            if let Some(i) = self.var_index(&a.var) {
                x[i] = v;
            }
        }
        Ok(x)
    }

    /// Variables not assigned by the initial formula.
    pub fn defaulted_variables(&self) -> Vec<String> {
        self.variables
            .iter()
            .filter(|v| !self.init.point.iter().any(|a| &a.var == *v))
            .cloned()
            .collect()
    }
}

/// Conjunction that drops literal `true` operands.
pub(crate) fn conj(a: &Expr, b: &Expr) -> Expr {
    if a.is_true_literal() {
        b.clone()
    } else if b.is_true_literal() {
        a.clone()
    } else {
        Expr::and(a.clone(), b.clone())
    }
}
