//! Derivative sets of sequential controllers.
//!
//! Controller states are syntactic terms. Two sums denote the same state when
//! they agree up to a permutation of summands; [`canonical`] picks one
//! representative by flattening sums and sorting summands by their text
//! (event name first, then the successor).

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use super::CtrlTerm;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerStateError {
    #[error("controller `{0}` is not defined")]
    Unresolved(String),
    #[error("controller `{0}` recurses without an event prefix")]
    Unguarded(String),
}

fn flatten(t: &CtrlTerm, out: &mut Vec<CtrlTerm>) {
    match t {
        CtrlTerm::Sum(a, b) => {
            flatten(a, out);
            flatten(b, out);
        }
        other => out.push(canonical(other)),
    }
}

/// Canonical representative of `t` modulo summand permutation.
pub fn canonical(t: &CtrlTerm) -> CtrlTerm {
    match t {
        CtrlTerm::Nil | CtrlTerm::Name(_) => t.clone(),
        CtrlTerm::Prefix(a, m) => CtrlTerm::Prefix(a.clone(), Box::new(canonical(m))),
        CtrlTerm::Sum(..) => {
            let mut parts = Vec::new();
            flatten(t, &mut parts);
            let mut keyed: Vec<(String, CtrlTerm)> =
                parts.into_iter().map(|p| (p.to_string(), p)).collect();
            keyed.sort_by(|a, b| a.0.cmp(&b.0));
            let mut it = keyed.into_iter().map(|(_, p)| p);
            let first = it.next().expect("a sum has at least two summands");
            it.fold(first, CtrlTerm::sum)
        }
    }
}

/// One-step successors `(event, next state)` of a controller state.
pub fn successors(
    t: &CtrlTerm,
    bodies: &BTreeMap<String, CtrlTerm>,
) -> Result<Vec<(String, CtrlTerm)>, ControllerStateError> {
    let mut out = Vec::new();
    let mut unfolding = BTreeSet::new();
    collect_successors(&canonical(t), bodies, &mut unfolding, &mut out)?;
    Ok(out)
}

fn collect_successors(
    t: &CtrlTerm,
    bodies: &BTreeMap<String, CtrlTerm>,
    unfolding: &mut BTreeSet<String>,
    out: &mut Vec<(String, CtrlTerm)>,
) -> Result<(), ControllerStateError> {
    match t {
        CtrlTerm::Nil => Ok(()),
        CtrlTerm::Prefix(a, m) => {
            out.push((a.clone(), canonical(m)));
            Ok(())
        }
        CtrlTerm::Sum(a, b) => {
            collect_successors(a, bodies, unfolding, out)?;
            collect_successors(b, bodies, unfolding, out)
        }
        CtrlTerm::Name(n) => {
            let body = bodies
                .get(n)
                .ok_or_else(|| ControllerStateError::Unresolved(n.clone()))?;
            if !unfolding.insert(n.clone()) {
                return Err(ControllerStateError::Unguarded(n.clone()));
            }
            let r = collect_successors(&canonical(body), bodies, unfolding, out);
            unfolding.remove(n);
            r
        }
    }
}

/// `ds(M)`: all states reachable from `m`, starting with `m` itself, in
/// breadth-first order.
pub fn derivative_set(
    m: &CtrlTerm,
    bodies: &BTreeMap<String, CtrlTerm>,
) -> Result<Vec<CtrlTerm>, ControllerStateError> {
    let start = canonical(m);
    let mut seen = vec![start.clone()];
    let mut queue = VecDeque::from([start]);
    while let Some(state) = queue.pop_front() {
        for (_, next) in successors(&state, bodies)? {
            if !seen.contains(&next) {
                seen.push(next.clone());
                queue.push_back(next);
            }
        }
    }
    Ok(seen)
}
