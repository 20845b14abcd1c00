//! Structural laws shared by the property and acceptance suites.

use std::collections::{BTreeMap, BTreeSet};

use hype_core::compiler::compile_subcomponent;
use hype_core::model::Expr;
use hype_core::tdsha::{assemble_field, product, ModeLabel, Tdsha};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::gen::SubSpec;

/// `|Q| = |TC| = |is(S)|`, `|TD| + |TS| = |is(S)|·|ev(S)|`, one edge per
/// event per mode, each edge leading to its branch's influence.
pub fn subcomponent_cardinality(spec: &SubSpec) -> Result<(), TestCaseError> {
    let src = spec.source();
    let m = hype_core::parser::parse_model(&src)
        .map_err(|e| TestCaseError::fail(format!("{e:?}\n{src}")))?;
    let t = compile_subcomponent(m.subcomponent("S").unwrap(), &m)
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
    let is = spec.influences().len();
    let ev = spec.events.len();
    prop_assert_eq!(t.modes.len(), is);
    prop_assert_eq!(t.flows.len(), is);
    prop_assert_eq!(t.instantaneous.len() + t.stochastic.len(), is * ev);
    let stoch = spec.events.iter().filter(|e| e.1).count();
    prop_assert_eq!(t.stochastic.len(), is * stoch);
    for q in 0..t.modes.len() {
        let mut out: Vec<&str> = t
            .instantaneous_from(q)
            .map(|(_, d)| d.event.as_str())
            .chain(t.stochastic_from(q).map(|(_, s)| s.event.as_str()))
            .collect();
        out.sort();
        let mut expected: Vec<&str> = spec.events.iter().map(|e| e.0.as_str()).collect();
        expected.sort();
        prop_assert_eq!(out, expected);
    }
    // the target of event e is the mode of e's influence
    let mode_of = |i: usize| -> String {
        let (s, ty) = spec.pool[i];
        format!("m(f, {s}, {ty})")
    };
    for d in &t.instantaneous {
        let k = spec.events.iter().position(|e| e.0 == d.event).unwrap();
        prop_assert_eq!(t.modes[d.tgt].to_string(), mode_of(spec.branch[k]));
        prop_assert!(d.guard.is_true_literal() && d.reset.is_empty() && d.weight == 1.0);
    }
    for s in &t.stochastic {
        let k = spec.events.iter().position(|e| e.0 == s.event).unwrap();
        prop_assert_eq!(t.modes[s.tgt].to_string(), mode_of(spec.branch[k]));
    }
    prop_assert_eq!(
        t.modes[t.init.mode].to_string(),
        mode_of(*spec.branch.last().unwrap())
    );
    Ok(())
}

/// Values of a boolean or real expression on a fixed grid of states, keyed
/// by variable name so automata with different variable orders compare.
fn fingerprint(e: &Expr, vars: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for a in [-1.0, 0.5, 2.0] {
        for b in [0.0, 1.0, 3.0] {
            let point: BTreeMap<String, f64> = vars
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), if i % 2 == 0 { a } else { b + i as f64 }))
                .collect();
            out.push(format!("{:?}", e.eval(&point).unwrap()));
        }
    }
    out
}

type EdgeKey = (usize, usize, String, String, Vec<String>);

fn edge_keys(t: &Tdsha, map: &dyn Fn(usize) -> usize, vars: &[String]) -> Vec<EdgeKey> {
    let mut keys: Vec<EdgeKey> = t
        .instantaneous
        .iter()
        .map(|d| {
            (
                map(d.src),
                map(d.tgt),
                d.event.clone(),
                format!("w{}", d.weight),
                fingerprint(&d.guard, vars),
            )
        })
        .chain(t.stochastic.iter().map(|s| {
            (
                map(s.src),
                map(s.tgt),
                s.event.clone(),
                format!("r{}", s.rate),
                fingerprint(&s.guard, vars),
            )
        }))
        .collect();
    keys.sort();
    keys
}

fn field_keys(t: &Tdsha, q: usize, vars: &[String]) -> BTreeMap<String, Vec<String>> {
    let f = assemble_field(t, q);
    t.variables
        .iter()
        .zip(&f.rhs)
        .map(|(v, e)| (v.clone(), fingerprint(e, vars)))
        .collect()
}

/// `|Q| = |Q1|·|Q2|`, pair-swap isomorphism, `min` weights on synchronized
/// instantaneous edges.
pub fn product_laws(a: &Tdsha, b: &Tdsha, sync: &BTreeSet<String>) -> Result<(), TestCaseError> {
    let p = product(a, b, sync).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let q = product(b, a, sync).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let (na, nb) = (a.modes.len(), b.modes.len());
    prop_assert_eq!(p.modes.len(), na * nb);
    prop_assert_eq!(q.modes.len(), na * nb);

    let swap = |i: usize| (i % nb) * na + i / nb;
    let mut vars = p.variables.clone();
    vars.sort();
    for i in 0..p.modes.len() {
        let j = swap(i);
        match (&p.modes[i], &q.modes[j]) {
            (ModeLabel::Pair(l1, l2), ModeLabel::Pair(r1, r2)) => {
                prop_assert_eq!(l1, r2);
                prop_assert_eq!(l2, r1);
            }
            _ => return Err(TestCaseError::fail("product modes are pairs")),
        }
        prop_assert_eq!(field_keys(&p, i, &vars), field_keys(&q, j, &vars));
    }
    prop_assert_eq!(edge_keys(&p, &swap, &vars), edge_keys(&q, &|i| i, &vars));
    prop_assert_eq!(swap(p.init.mode), q.init.mode);

    // synchronized instantaneous edges: one per matching pair, weight min(w1, w2)
    for e in sync.iter().filter(|e| a.events_d.contains(*e)) {
        let ea: Vec<_> = a.instantaneous.iter().filter(|d| &d.event == e).collect();
        let eb: Vec<_> = b.instantaneous.iter().filter(|d| &d.event == e).collect();
        let mut expected: Vec<(usize, usize, String)> = ea
            .iter()
            .flat_map(|x| {
                eb.iter().map(move |y| {
                    (
                        x.src * nb + y.src,
                        x.tgt * nb + y.tgt,
                        format!("{}", x.weight.min(y.weight)),
                    )
                })
            })
            .collect();
        let mut got: Vec<(usize, usize, String)> = p
            .instantaneous
            .iter()
            .filter(|d| &d.event == e)
            .map(|d| (d.src, d.tgt, format!("{}", d.weight)))
            .collect();
        expected.sort();
        got.sort();
        prop_assert_eq!(got, expected);
    }
    let interleaved = |t: &Tdsha, n_other: usize| {
        t.instantaneous
            .iter()
            .filter(|d| !sync.contains(&d.event))
            .count()
            * n_other
    };
    let joint: usize = sync
        .iter()
        .map(|e| {
            a.instantaneous.iter().filter(|d| &d.event == e).count()
                * b.instantaneous.iter().filter(|d| &d.event == e).count()
        })
        .sum();
    prop_assert_eq!(
        p.instantaneous.len(),
        interleaved(a, nb) + interleaved(b, na) + joint
    );
    Ok(())
}

/// Product with the unit automaton on either side changes only the labels.
pub fn unit_law(a: &Tdsha) -> Result<(), TestCaseError> {
    let none = BTreeSet::new();
    for p in [
        product(a, &Tdsha::unit(), &none),
        product(&Tdsha::unit(), a, &none),
    ] {
        let p = p.map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(p.modes.len(), a.modes.len());
        prop_assert_eq!(&p.variables, &a.variables);
        let mut flows = a.flows.clone();
        flows.sort_by_key(|f| f.mode);
        prop_assert_eq!(&p.flows, &flows);
        prop_assert_eq!(&p.instantaneous, &a.instantaneous);
        prop_assert_eq!(&p.stochastic, &a.stochastic);
        prop_assert_eq!(&p.init, &a.init);
        for (l, r) in p.modes.iter().zip(&a.modes) {
            let parts: Vec<String> = l.components().iter().map(|c| c.to_string()).collect();
            prop_assert!(parts.contains(&r.to_string()));
        }
    }
    Ok(())
}
