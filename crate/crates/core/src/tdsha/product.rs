use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{conj, Flow, Init, Instantaneous, ModeLabel, Stochastic, Tdsha, TdshaError};
use crate::model::{Assignment, EventKind, Expr};

/// Two same-labelled transitions whose resets assign one variable two
/// different expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResetWitness {
    pub event: String,
    pub kind: EventKind,
    /// Index into the first automaton's transitions of `kind`.
    pub first: usize,
    /// Index into the second automaton's transitions of `kind`.
    pub second: usize,
    pub var: String,
    pub left: Expr,
    pub right: Expr,
}

/// First variable assigned differently by the two resets, if any.
fn clash<'a>(r1: &'a [Assignment], r2: &'a [Assignment]) -> Option<(&'a str, &'a Expr, &'a Expr)> {
    r1.iter().find_map(|a| {
        r2.iter()
            .find(|b| b.var == a.var && b.value != a.value)
            .map(|b| (a.var.as_str(), &a.value, &b.value))
    })
}

fn union_reset(r1: &[Assignment], r2: &[Assignment]) -> Vec<Assignment> {
    let mut out = r1.to_vec();
    for b in r2 {
        if !out.iter().any(|a| a.var == b.var) {
            out.push(b.clone());
        }
    }
    out
}

/// Finds a pair of same-kind, same-label transitions with contradictory resets.
pub fn reset_conflict(t1: &Tdsha, t2: &Tdsha) -> Option<ResetWitness> {
    let witness = |kind, event: &str, i, j, (var, l, r): (&str, &Expr, &Expr)| ResetWitness {
        event: event.to_string(),
        kind,
        first: i,
        second: j,
        var: var.to_string(),
        left: l.clone(),
        right: r.clone(),
    };
    for (i, a) in t1.instantaneous.iter().enumerate() {
        for (j, b) in t2.instantaneous.iter().enumerate() {
            if a.event == b.event {
                if let Some(c) = clash(&a.reset, &b.reset) {
                    return Some(witness(EventKind::Instantaneous, &a.event, i, j, c));
                }
            }
        }
    }
    for (i, a) in t1.stochastic.iter().enumerate() {
        for (j, b) in t2.stochastic.iter().enumerate() {
            if a.event == b.event {
                if let Some(c) = clash(&a.reset, &b.reset) {
                    return Some(witness(EventKind::Stochastic, &a.event, i, j, c));
                }
            }
        }
    }
    None
}

pub fn reset_compatible(t1: &Tdsha, t2: &Tdsha) -> bool {
    reset_conflict(t1, t2).is_none()
}

fn init_clash(t1: &Tdsha, t2: &Tdsha) -> Option<TdshaError> {
    clash(&t1.init.point, &t2.init.point).map(|(var, l, r)| TdshaError::InitIncompatible {
        var: var.to_string(),
        left: l.clone(),
        right: r.clone(),
    })
}

/// True iff the initial formulas assign no variable two different values.
pub fn init_compatible(t1: &Tdsha, t2: &Tdsha) -> bool {
    init_clash(t1, t2).is_none()
}

/// The synchronized product `t1 ⊗_S t2`.
///
/// Transitions are emitted in a fixed order: interleavings of the first
/// factor, interleavings of the second, then synchronized pairs.
pub fn product(t1: &Tdsha, t2: &Tdsha, sync: &BTreeSet<String>) -> Result<Tdsha, TdshaError> {
    let shared: BTreeSet<String> = t1.events().intersection(&t2.events()).cloned().collect();
    let missing: Vec<String> = sync.difference(&shared).cloned().collect();
    if !missing.is_empty() {
        return Err(TdshaError::NotShared(missing));
    }
    for e in &shared {
        if t1.event_kind(e) != t2.event_kind(e) {
            return Err(TdshaError::KindConflict(e.clone()));
        }
    }
    if let Some(w) = reset_conflict(t1, t2) {
        return Err(TdshaError::ResetIncompatible(Box::new(w)));
    }
    if let Some(e) = init_clash(t1, t2) {
        return Err(e);
    }

    let (n1, n2) = (t1.modes.len(), t2.modes.len());
    let at = |i1: usize, i2: usize| i1 * n2 + i2;

    let mut variables = t1.variables.clone();
    for v in &t2.variables {
        if !variables.contains(v) {
            variables.push(v.clone());
        }
    }
    let lift = |t: &Tdsha, s: &[f64]| {
        let mut out = vec![0.0; variables.len()];
        for (k, c) in s.iter().enumerate() {
            let j = variables.iter().position(|v| *v == t.variables[k]).unwrap();
            out[j] += c;
        }
        out
    };

    let mut modes = Vec::with_capacity(n1 * n2);
    let mut flows = Vec::new();
    for (i1, l1) in t1.modes.iter().enumerate() {
        for (i2, l2) in t2.modes.iter().enumerate() {
            modes.push(ModeLabel::Pair(Box::new(l1.clone()), Box::new(l2.clone())));
            let q = at(i1, i2);
            for f in t1.flows_in(i1) {
                flows.push(Flow {
                    mode: q,
                    stoich: lift(t1, &f.stoich),
                    rate: f.rate.clone(),
                });
            }
            for f in t2.flows_in(i2) {
                flows.push(Flow {
                    mode: q,
                    stoich: lift(t2, &f.stoich),
                    rate: f.rate.clone(),
                });
            }
        }
    }

    let mut instantaneous = Vec::new();
    for d in t1.instantaneous.iter().filter(|d| !sync.contains(&d.event)) {
        for i2 in 0..n2 {
            instantaneous.push(Instantaneous {
                src: at(d.src, i2),
                tgt: at(d.tgt, i2),
                ..d.clone()
            });
        }
    }
    for d in t2.instantaneous.iter().filter(|d| !sync.contains(&d.event)) {
        for i1 in 0..n1 {
            instantaneous.push(Instantaneous {
                src: at(i1, d.src),
                tgt: at(i1, d.tgt),
                ..d.clone()
            });
        }
    }
    for a in t1.instantaneous.iter().filter(|d| sync.contains(&d.event)) {
        for b in t2.instantaneous.iter().filter(|d| d.event == a.event) {
            instantaneous.push(Instantaneous {
                src: at(a.src, b.src),
                tgt: at(a.tgt, b.tgt),
                guard: conj(&a.guard, &b.guard),
                reset: union_reset(&a.reset, &b.reset),
                weight: a.weight.min(b.weight),
                event: a.event.clone(),
            });
        }
    }

    let mut stochastic = Vec::new();
    for d in t1.stochastic.iter().filter(|d| !sync.contains(&d.event)) {
        for i2 in 0..n2 {
            stochastic.push(Stochastic {
                src: at(d.src, i2),
                tgt: at(d.tgt, i2),
                ..d.clone()
            });
        }
    }
    for d in t2.stochastic.iter().filter(|d| !sync.contains(&d.event)) {
        for i1 in 0..n1 {
            stochastic.push(Stochastic {
                src: at(i1, d.src),
                tgt: at(i1, d.tgt),
                ..d.clone()
            });
        }
    }
    for a in t1.stochastic.iter().filter(|d| sync.contains(&d.event)) {
        for b in t2.stochastic.iter().filter(|d| d.event == a.event) {
            if a.rate != b.rate {
                return Err(TdshaError::RateInconsistent {
                    event: a.event.clone(),
                    left: a.rate.clone(),
                    right: b.rate.clone(),
                });
            }
            stochastic.push(Stochastic {
                src: at(a.src, b.src),
                tgt: at(a.tgt, b.tgt),
                guard: conj(&a.guard, &b.guard),
                reset: union_reset(&a.reset, &b.reset),
                rate: a.rate.clone(),
                event: a.event.clone(),
            });
        }
    }

    let t = Tdsha {
        modes,
        variables,
        flows,
        instantaneous,
        stochastic,
        events_d: t1.events_d.union(&t2.events_d).cloned().collect(),
        events_s: t1.events_s.union(&t2.events_s).cloned().collect(),
        init: Init {
            mode: at(t1.init.mode, t2.init.mode),
            point: union_reset(&t1.init.point, &t2.init.point),
        },
    };
    t.check_rate_consistency()?;
    Ok(t)
}
