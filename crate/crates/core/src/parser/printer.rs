use std::collections::BTreeSet;
use std::fmt::Write;

use crate::model::expr::fmt_num;
use crate::model::{CompositionTree, ControllerBody, CtrlTerm, EventKind, Expr, HypeModel};

/// Canonical concrete syntax. Reparsing the output yields an equal model.
pub fn pretty_print(m: &HypeModel) -> String {
    let stochastic: BTreeSet<&str> = m
        .conditions
        .iter()
        .filter(|(_, c)| c.kind == EventKind::Stochastic)
        .map(|(e, _)| e.as_str())
        .collect();
    let ev = |e: &str| {
        if stochastic.contains(e) {
            format!("~{e}")
        } else {
            e.to_string()
        }
    };

    let mut out = String::new();
    let _ = writeln!(out, "model {};", m.name);
    if !m.variables.is_empty() {
        let names: Vec<&str> = m.variables.iter().map(|v| v.name.as_str()).collect();
        let _ = writeln!(out, "var {};", names.join(", "));
    }
    for c in &m.constants {
        let _ = writeln!(out, "const {} = {};", c.name, fmt_num(c.value));
    }
    for t in &m.types {
        let _ = writeln!(out, "type {}{} = {};", t.name, args(&t.params), t.body);
    }
    for iv in &m.influence_vars {
        let _ = writeln!(out, "iv({}) = {};", iv.influence, iv.variable);
    }
    for s in &m.subcomponents {
        let branches: Vec<String> = s
            .branches
            .iter()
            .map(|b| {
                format!(
                    "{}:{}.{}{}",
                    ev(&b.event),
                    b.influence,
                    b.target,
                    args(&b.target_args)
                )
            })
            .collect();
        let _ = writeln!(
            out,
            "subcomponent {}{} = {};",
            s.name,
            args(&s.params),
            branches.join(" + ")
        );
    }
    for c in &m.components {
        let _ = writeln!(out, "component {} = {};", c.name, tree(&c.tree, &ev));
    }
    for c in &m.controllers {
        let body = match &c.body {
            ControllerBody::Sequential(t) => ctrl(t, &ev),
            ControllerBody::Composite(t) => tree(t, &ev),
        };
        let _ = writeln!(out, "controller {} = {};", c.name, body);
    }
    let sys = &m.system;
    let con = match &sys.controller {
        leaf @ CompositionTree::Leaf { .. } => tree(leaf, &ev),
        t => format!("({})", tree(t, &ev)),
    };
    let _ = writeln!(
        out,
        "system {} = {} {} init.{};",
        sys.name,
        tree(&sys.uncontrolled, &ev),
        sync(&sys.sync, &ev),
        con
    );
    for (e, c) in &m.conditions {
        let reset = if c.reset.is_empty() {
            "true".to_string()
        } else {
            c.reset
                .iter()
                .map(|a| format!("{}' = {}", a.var, reset_rhs(&a.value)))
                .collect::<Vec<_>>()
                .join(" and ")
        };
        let _ = writeln!(out, "ec({}) = ({}, {});", ev(e), c.activation, reset);
    }
    out
}

fn args(a: &[String]) -> String {
    if a.is_empty() {
        String::new()
    } else {
        format!("({})", a.join(", "))
    }
}

fn sync(events: &BTreeSet<String>, ev: &dyn Fn(&str) -> String) -> String {
    let names: Vec<String> = events.iter().map(|e| ev(e)).collect();
    format!("sync{{{}}}", names.join(", "))
}

fn tree(t: &CompositionTree, ev: &dyn Fn(&str) -> String) -> String {
    match t {
        CompositionTree::Leaf { name, args: a, .. } => format!("{name}{}", args(a)),
        CompositionTree::Sync {
            left,
            right,
            events,
            ..
        } => {
            let r = match **right {
                CompositionTree::Sync { .. } => format!("({})", tree(right, ev)),
                _ => tree(right, ev),
            };
            format!("{} {} {}", tree(left, ev), sync(events, ev), r)
        }
    }
}

fn ctrl(t: &CtrlTerm, ev: &dyn Fn(&str) -> String) -> String {
    match t {
        CtrlTerm::Nil => "0".into(),
        CtrlTerm::Name(n) => n.clone(),
        CtrlTerm::Prefix(a, m) => match **m {
            CtrlTerm::Sum(..) => format!("{}.({})", ev(a), ctrl(m, ev)),
            _ => format!("{}.{}", ev(a), ctrl(m, ev)),
        },
        CtrlTerm::Sum(a, b) => match **b {
            CtrlTerm::Sum(..) => format!("{} + ({})", ctrl(a, ev), ctrl(b, ev)),
            _ => format!("{} + {}", ctrl(a, ev), ctrl(b, ev)),
        },
    }
}

/// Reset right-hand sides are read at additive level.
fn reset_rhs(e: &Expr) -> String {
    match e {
        Expr::If(..) | Expr::Cmp(..) | Expr::And(..) | Expr::Or(..) | Expr::Not(..) => {
            format!("({e})")
        }
        _ => e.to_string(),
    }
}
