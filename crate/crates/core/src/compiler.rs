//! Compositional translation of a HYPE model into a TDSHA.
//!
//! Each subcomponent and each sequential controller becomes a small
//! automaton; composition trees become synchronized products; the model is
//! the product of its uncontrolled system and its controller over the
//! system's synchronization set. Guards, rates and resets come only from the
//! controller side: subcomponent edges carry `true` guards and identity
//! resets, and stochastic subcomponent edges carry the event's rate so that
//! rates stay consistent across factors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    canonical, derivative_set, successors, Assignment, CompositionTree, ControllerBody,
    ControllerStateError, CtrlTerm, EvalError, EventKind, Expr, HypeModel, Subcomponent, Violation,
    INIT_EVENT,
};
use crate::tdsha::{
    product, prune_unreachable, Flow, Init, Instantaneous, ModeLabel, Stochastic, Tdsha, TdshaError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PruneMode {
    Off,
    /// Prune once, after the last product.
    #[default]
    Final,
    /// Prune after every product.
    EachStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub modes_before: usize,
    pub modes_after: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileReport {
    pub prune: PruneMode,
    /// Stages in pipeline order.
    pub stages: Vec<StageReport>,
    /// Variables without an initial value; they start at 0.
    pub defaulted_variables: Vec<String>,
}

impl CompileReport {
    pub fn final_stage(&self) -> &StageReport {
        self.stages
            .last()
            .expect("compilation has at least one stage")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("model is not well defined: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("`{0}` is not a subcomponent, component or controller")]
    Unknown(String),
    #[error("event `{0}` has no event condition")]
    MissingCondition(String),
    #[error("`{name}`: {source}")]
    Controller {
        name: String,
        source: ControllerStateError,
    },
    #[error("{context}: {source}")]
    Eval { context: String, source: EvalError },
    #[error("composing {context}: {source}")]
    Product { context: String, source: TdshaError },
}

fn condition<'m>(
    m: &'m HypeModel,
    event: &str,
) -> Result<&'m crate::model::EventCondition, CompileError> {
    m.condition(event)
        .ok_or_else(|| CompileError::MissingCondition(event.to_string()))
}

fn inline_reset(m: &HypeModel, reset: &[Assignment]) -> Vec<Assignment> {
    reset
        .iter()
        .map(|a| Assignment {
            var: a.var.clone(),
            value: m.inline_constants(&a.value),
        })
        .collect()
}

fn event_sets(m: &HypeModel) -> (BTreeSet<String>, BTreeSet<String>) {
    m.events_by_kind()
}

/// Automaton of a subcomponent, one mode per distinct influence.
pub fn compile_subcomponent(s: &Subcomponent, m: &HypeModel) -> Result<Tdsha, CompileError> {
    compile_subcomponent_with(s, &s.params, m)
}

/// Like [`compile_subcomponent`], with actual variables bound to the
/// subcomponent's formal parameters.
pub fn compile_subcomponent_with(
    s: &Subcomponent,
    actuals: &[String],
    m: &HypeModel,
) -> Result<Tdsha, CompileError> {
    let binding: BTreeMap<&str, &str> = s
        .params
        .iter()
        .map(String::as_str)
        .zip(actuals.iter().map(String::as_str))
        .collect();
    let variables = m.variable_names();
    let influences = s.influences();
    let mut modes = Vec::new();
    let mut flows = Vec::new();
    for (q, infl) in influences.iter().enumerate() {
        modes.push(ModeLabel::Influence(infl.to_string()));
        let target = m
            .variable_of(&infl.name)
            .ok_or_else(|| CompileError::Unknown(infl.name.clone()))?;
        let mut stoich = vec![0.0; variables.len()];
        stoich[variables.iter().position(|v| v == target).unwrap()] = 1.0;
        let none: [(&str, f64); 0] = [];
        let strength = m
            .inline_constants(&infl.strength)
            .eval_real(&none)
            .map_err(|source| CompileError::Eval {
                context: format!("strength of {infl} in `{}`", s.name),
                source,
            })?;
        let ty = m
            .influence_type(&infl.itype.name)
            .ok_or_else(|| CompileError::Unknown(infl.itype.name.clone()))?;
        let args: BTreeMap<&str, String> = ty
            .params
            .iter()
            .map(String::as_str)
            .zip(infl.itype.args.iter().map(|a| {
                binding
                    .get(a.as_str())
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| a.clone())
            }))
            .collect();
        let body = ty
            .body
            .substitute(&|n| args.get(n).map(|v| Expr::var(v.clone())));
        flows.push(Flow {
            mode: q,
            stoich,
            rate: Expr::product(Expr::num(strength), m.inline_constants(&body)),
        });
    }
    let init_infl = &s
        .init_branch()
        .ok_or_else(|| CompileError::MissingCondition(format!("{INIT_EVENT} in `{}`", s.name)))?
        .influence;
    let mode_of = |i: &crate::model::Influence| influences.iter().position(|x| x == i).unwrap();

    let mut instantaneous = Vec::new();
    let mut stochastic = Vec::new();
    for src in 0..influences.len() {
        for b in s.branches.iter().filter(|b| b.event != INIT_EVENT) {
            let tgt = mode_of(&b.influence);
            let ec = condition(m, &b.event)?;
            match ec.kind {
                EventKind::Instantaneous => instantaneous.push(Instantaneous {
                    src,
                    tgt,
                    guard: Expr::Bool(true),
                    reset: vec![],
                    weight: 1.0,
                    event: b.event.clone(),
                }),
                EventKind::Stochastic => stochastic.push(Stochastic {
                    src,
                    tgt,
                    guard: Expr::Bool(true),
                    reset: vec![],
                    rate: m.inline_constants(&ec.activation),
                    event: b.event.clone(),
                }),
            }
        }
    }
    let (events_d, events_s) = event_sets(m);
    Ok(Tdsha {
        modes,
        variables,
        flows,
        instantaneous,
        stochastic,
        events_d,
        events_s,
        init: Init {
            mode: mode_of(init_infl),
            point: vec![],
        },
    })
}

/// Automaton of a sequential controller term: one mode per derivative.
pub fn compile_seq_controller(term: &CtrlTerm, m: &HypeModel) -> Result<Tdsha, CompileError> {
    let bodies = m.controller_bodies();
    let wrap = |source| CompileError::Controller {
        name: term.to_string(),
        source,
    };
    let states = derivative_set(term, &bodies).map_err(wrap)?;
    let mut instantaneous = Vec::new();
    let mut stochastic = Vec::new();
    for (src, state) in states.iter().enumerate() {
        for (a, next) in successors(state, &bodies).map_err(wrap)? {
            let next = canonical(&next);
            let tgt = states.iter().position(|s| *s == next).unwrap();
            let ec = condition(m, &a)?;
            let reset = inline_reset(m, &ec.reset);
            match ec.kind {
                EventKind::Instantaneous => instantaneous.push(Instantaneous {
                    src,
                    tgt,
                    guard: m.inline_constants(&ec.activation),
                    reset,
                    weight: 1.0,
                    event: a,
                }),
                EventKind::Stochastic => stochastic.push(Stochastic {
                    src,
                    tgt,
                    guard: Expr::Bool(true),
                    reset,
                    rate: m.inline_constants(&ec.activation),
                    event: a,
                }),
            }
        }
    }
    let point = inline_reset(m, &condition(m, INIT_EVENT)?.reset);
    let (events_d, events_s) = event_sets(m);
    Ok(Tdsha {
        modes: states
            .iter()
            .map(|s| ModeLabel::Controller(s.to_string()))
            .collect(),
        variables: m.variable_names(),
        flows: vec![],
        instantaneous,
        stochastic,
        events_d,
        events_s,
        init: Init { mode: 0, point },
    })
}

struct Pipeline<'m> {
    m: &'m HypeModel,
    prune: PruneMode,
    stages: Vec<StageReport>,
}

impl<'m> Pipeline<'m> {
    fn stage(&mut self, name: String, started: Instant, t: Tdsha, prune: bool) -> Tdsha {
        let before = t.modes.len();
        let t = if prune { prune_unreachable(&t) } else { t };
        self.stages.push(StageReport {
            stage: name,
            modes_before: before,
            modes_after: t.modes.len(),
            seconds: started.elapsed().as_secs_f64(),
        });
        t
    }

    fn join(
        &mut self,
        a: &Tdsha,
        b: &Tdsha,
        sync: &BTreeSet<String>,
        name: String,
        last: bool,
    ) -> Result<Tdsha, CompileError> {
        let started = Instant::now();
        let p = product(a, b, sync).map_err(|source| CompileError::Product {
            context: name.clone(),
            source,
        })?;
        let prune = match self.prune {
            PruneMode::Off => false,
            PruneMode::Final => last,
            PruneMode::EachStage => true,
        };
        Ok(self.stage(name, started, p, prune))
    }

    fn uncontrolled(&mut self, tree: &CompositionTree) -> Result<Tdsha, CompileError> {
        match tree {
            CompositionTree::Leaf { name, args, .. } => {
                let started = Instant::now();
                if let Some(s) = self.m.subcomponent(name) {
                    let actuals = if args.is_empty() { &s.params } else { args };
                    let t = compile_subcomponent_with(s, actuals, self.m)?;
                    Ok(self.stage(format!("subcomponent {name}"), started, t, false))
                } else if let Some(c) = self.m.component(name) {
                    self.uncontrolled(&c.tree)
                } else {
                    Err(CompileError::Unknown(name.clone()))
                }
            }
            CompositionTree::Sync {
                left,
                right,
                events,
                ..
            } => {
                let l = self.uncontrolled(left)?;
                let r = self.uncontrolled(right)?;
                let name = format!("product {}", tree_text(tree));
                self.join(&l, &r, events, name, false)
            }
        }
    }

    fn controller(&mut self, tree: &CompositionTree) -> Result<Tdsha, CompileError> {
        match tree {
            CompositionTree::Leaf { name, .. } => match self.m.controller(name).map(|c| &c.body) {
                Some(ControllerBody::Sequential(_)) => {
                    let started = Instant::now();
                    let t = compile_seq_controller(&CtrlTerm::name(name.clone()), self.m)?;
                    Ok(self.stage(format!("controller {name}"), started, t, false))
                }
                Some(ControllerBody::Composite(inner)) => self.controller(inner),
                None => Err(CompileError::Unknown(name.clone())),
            },
            CompositionTree::Sync {
                left,
                right,
                events,
                ..
            } => {
                let l = self.controller(left)?;
                let r = self.controller(right)?;
                let name = format!("product {}", tree_text(tree));
                self.join(&l, &r, events, name, false)
            }
        }
    }
}

fn tree_text(t: &CompositionTree) -> String {
    match t {
        CompositionTree::Leaf { name, .. } => name.clone(),
        CompositionTree::Sync {
            left,
            right,
            events,
            ..
        } => {
            let evs: Vec<&str> = events.iter().map(String::as_str).collect();
            format!(
                "({} sync{{{}}} {})",
                tree_text(left),
                evs.join(", "),
                tree_text(right)
            )
        }
    }
}

/// Automaton of an uncontrolled system tree, without pruning.
pub fn compile_uncontrolled(tree: &CompositionTree, m: &HypeModel) -> Result<Tdsha, CompileError> {
    Pipeline {
        m,
        prune: PruneMode::Off,
        stages: vec![],
    }
    .uncontrolled(tree)
}

/// Automaton of a controller tree, without pruning.
pub fn compile_controller(tree: &CompositionTree, m: &HypeModel) -> Result<Tdsha, CompileError> {
    Pipeline {
        m,
        prune: PruneMode::Off,
        stages: vec![],
    }
    .controller(tree)
}

/// Compiles a whole model: `T(Σ) ⊗_L T(Con)`.
pub fn compile(m: &HypeModel, prune: PruneMode) -> Result<(Tdsha, CompileReport), CompileError> {
    let violations = crate::model::validate(m);
    if !violations.is_empty() {
        return Err(CompileError::Invalid(violations));
    }
    let mut p = Pipeline {
        m,
        prune,
        stages: vec![],
    };
    let sys = &m.system;
    let uncontrolled = p.uncontrolled(&sys.uncontrolled)?;
    let controller = p.controller(&sys.controller)?;
    let t = p.join(
        &uncontrolled,
        &controller,
        &sys.sync,
        format!("system {}", sys.name),
        true,
    )?;
    let report = CompileReport {
        prune,
        stages: p.stages,
        defaulted_variables: t.defaulted_variables(),
    };
    Ok((t, report))
}

impl fmt::Display for CompileReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.stages {
            write!(f, "{}: modes: {}", s.stage, s.modes_before)?;
            if s.modes_after != s.modes_before {
                write!(f, " → {} (pruned)", s.modes_after)?;
            }
            writeln!(f)?;
        }
        for v in &self.defaulted_variables {
            writeln!(f, "warning: `{v}` has no initial value; it starts at 0")?;
        }
        Ok(())
    }
}
