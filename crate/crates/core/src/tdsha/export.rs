//! Automaton document (JSON) and Graphviz exports. Expressions are written
//! in the model language's expression syntax.

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{assemble_field, ModeLabel, Tdsha};
use crate::model::Assignment;

pub const FORMAT: &str = "tdsha/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutomatonDocument {
    pub format: String,
    pub variables: Vec<String>,
    pub events: EventSets,
    pub modes: Vec<ModeDoc>,
    pub initial: InitDoc,
    pub flows: Vec<FlowDoc>,
    pub instantaneous: Vec<InstantaneousDoc>,
    pub stochastic: Vec<StochasticDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSets {
    pub instantaneous: BTreeSet<String>,
    pub stochastic: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDoc {
    pub id: usize,
    pub name: String,
    pub label: ModeLabel,
    /// `dX/dt` per variable, aligned with `variables`.
    pub field: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentDoc {
    pub var: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitDoc {
    pub mode: usize,
    pub point: Vec<AssignmentDoc>,
    /// Variables the initial formula leaves out; they start at 0.
    pub defaulted: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowDoc {
    pub mode: usize,
    pub stoichiometry: Vec<f64>,
    pub rate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstantaneousDoc {
    pub source: usize,
    pub target: usize,
    pub event: String,
    pub guard: String,
    pub reset: Vec<AssignmentDoc>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticDoc {
    pub source: usize,
    pub target: usize,
    pub event: String,
    pub guard: String,
    pub reset: Vec<AssignmentDoc>,
    pub rate: String,
}

fn assignments(r: &[Assignment]) -> Vec<AssignmentDoc> {
    r.iter()
        .map(|a| AssignmentDoc {
            var: a.var.clone(),
            value: a.value.to_string(),
        })
        .collect()
}

impl AutomatonDocument {
    pub fn new(t: &Tdsha) -> Self {
        AutomatonDocument {
            format: FORMAT.into(),
            variables: t.variables.clone(),
            events: EventSets {
                instantaneous: t.events_d.clone(),
                stochastic: t.events_s.clone(),
            },
            modes: t
                .modes
                .iter()
                .enumerate()
                .map(|(id, label)| ModeDoc {
                    id,
                    name: label.to_string(),
                    label: label.clone(),
                    field: assemble_field(t, id)
                        .rhs
                        .iter()
                        .map(|e| e.to_string())
                        .collect(),
                })
                .collect(),
            initial: InitDoc {
                mode: t.init.mode,
                point: assignments(&t.init.point),
                defaulted: t.defaulted_variables(),
            },
            flows: t
                .flows
                .iter()
                .map(|f| FlowDoc {
                    mode: f.mode,
                    stoichiometry: f.stoich.clone(),
                    rate: f.rate.to_string(),
                })
                .collect(),
            instantaneous: t
                .instantaneous
                .iter()
                .map(|d| InstantaneousDoc {
                    source: d.src,
                    target: d.tgt,
                    event: d.event.clone(),
                    guard: d.guard.to_string(),
                    reset: assignments(&d.reset),
                    weight: d.weight,
                })
                .collect(),
            stochastic: t
                .stochastic
                .iter()
                .map(|s| StochasticDoc {
                    source: s.src,
                    target: s.tgt,
                    event: s.event.clone(),
                    guard: s.guard.to_string(),
                    reset: assignments(&s.reset),
                    rate: s.rate.to_string(),
                })
                .collect(),
        }
    }
}

pub fn to_json(t: &Tdsha) -> String {
    serde_json::to_string_pretty(&AutomatonDocument::new(t)).expect("automaton documents serialize")
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn reset_text(r: &[Assignment]) -> String {
    if r.is_empty() {
        "true".into()
    } else {
        r.iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(" and ")
    }
}

/// Graphviz digraph: modes are boxes annotated with their ODEs,
/// instantaneous edges are solid and stochastic edges dashed.
pub fn to_dot(t: &Tdsha) -> String {
    let mut out = String::from(
        "digraph tdsha {\n  rankdir=LR;\n  node [shape=box, fontname=\"monospace\"];\n",
    );
    out.push_str("  start [shape=point];\n");
    for (q, label) in t.modes.iter().enumerate() {
        let field = assemble_field(t, q);
        let mut text = label.to_string();
        for (v, rhs) in t.variables.iter().zip(&field.rhs) {
            let _ = write!(text, "\nd{v}/dt = {rhs}");
        }
        let _ = writeln!(out, "  q{q} [label={}];", quote(&text));
    }
    let init = reset_text(&t.init.point);
    let _ = writeln!(out, "  start -> q{} [label={}];", t.init.mode, quote(&init));
    for d in &t.instantaneous {
        let text = format!(
            "{}\n[{}] / {}\nw = {}",
            d.event,
            d.guard,
            reset_text(&d.reset),
            d.weight
        );
        let _ = writeln!(out, "  q{} -> q{} [label={}];", d.src, d.tgt, quote(&text));
    }
    for s in &t.stochastic {
        let mut text = format!("{} @ {}", s.event, s.rate);
        if !s.guard.is_true_literal() {
            let _ = write!(text, "\n[{}]", s.guard);
        }
        let _ = write!(text, "\n/ {}", reset_text(&s.reset));
        let _ = writeln!(
            out,
            "  q{} -> q{} [style=dashed, label={}];",
            s.src,
            s.tgt,
            quote(&text)
        );
    }
    out.push_str("}\n");
    out
}
