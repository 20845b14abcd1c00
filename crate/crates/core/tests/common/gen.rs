//! Random models and automata for property tests.

use std::collections::{BTreeMap, BTreeSet};

use hype_core::model::{CmpOp, CtrlTerm, Expr};
use hype_core::tdsha::{Flow, Init, Instantaneous, ModeLabel, Stochastic, Tdsha};
use proptest::prelude::*;

const STRENGTHS: [&str; 5] = ["0", "1", "2.5", "-1", "4"];
const TYPES: [&str; 2] = ["const", "half"];

/// A well-formed subcomponent `S`: one branch per event plus an `init`
/// branch, all over the influence name `f`.
#[derive(Debug, Clone)]
pub struct SubSpec {
    /// (event, stochastic)
    pub events: Vec<(String, bool)>,
    /// (strength, type) per distinct influence.
    pub pool: Vec<(&'static str, &'static str)>,
    /// Influence of each branch; the last one is the `init` branch.
    pub branch: Vec<usize>,
}

impl SubSpec {
    /// Distinct influences actually used by some branch.
    pub fn influences(&self) -> BTreeSet<(&'static str, &'static str)> {
        self.branch.iter().map(|&i| self.pool[i]).collect()
    }

    pub fn source(&self) -> String {
        let mut out =
            String::from("model gen;\nvar X;\ntype const = 1;\ntype half = 0.5;\niv(f) = X;\n");
        let mut branches = Vec::new();
        for ((e, stoch), &i) in self.events.iter().zip(&self.branch) {
            let (s, ty) = self.pool[i];
            let sigil = if *stoch { "~" } else { "" };
            branches.push(format!("{sigil}{e}:(f, {s}, {ty}).S"));
        }
        let (s, ty) = self.pool[*self.branch.last().unwrap()];
        branches.push(format!("init:(f, {s}, {ty}).S"));
        out.push_str(&format!("subcomponent S = {};\n", branches.join(" + ")));
        let names: Vec<String> = self
            .events
            .iter()
            .map(|(e, stoch)| format!("{}{e}", if *stoch { "~" } else { "" }))
            .collect();
        let loops: Vec<String> = names.iter().map(|e| format!("{e}.C")).collect();
        out.push_str(&format!("controller C = {};\n", loops.join(" + ")));
        out.push_str(&format!(
            "system Sys = S sync{{init, {}}} init.C;\n",
            names.join(", ")
        ));
        out.push_str("ec(init) = (true, X' = 1);\n");
        for (k, (e, stoch)) in self.events.iter().enumerate() {
            if *stoch {
                out.push_str(&format!("ec(~{e}) = ({}, true);\n", 0.5 + k as f64));
            } else {
                out.push_str(&format!("ec({e}) = (X >= {k}, X' = X + 1);\n"));
            }
        }
        out
    }
}

pub fn sub_spec() -> impl Strategy<Value = SubSpec> {
    let combos: Vec<(&'static str, &'static str)> = STRENGTHS
        .iter()
        .flat_map(|s| TYPES.iter().map(move |t| (*s, *t)))
        .collect();
    (
        proptest::sample::subsequence(combos, 1..=4),
        proptest::collection::vec(any::<bool>(), 1..=5),
    )
        .prop_flat_map(|(pool, kinds)| {
            let p = pool.len();
            let events: Vec<(String, bool)> = kinds
                .iter()
                .enumerate()
                .map(|(i, &s)| (format!("e{i}"), s))
                .collect();
            let n = events.len() + 1;
            (Just(pool), Just(events), proptest::collection::vec(0..p, n))
        })
        .prop_map(|(pool, events, branch)| SubSpec {
            events,
            pool,
            branch,
        })
}

const INST: [&str; 3] = ["a", "b", "c"];
const STOCH: [&str; 2] = ["s", "u"];
const WEIGHTS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

fn stoch_rate(e: &str) -> Expr {
    match e {
        "s" => Expr::num(1.5),
        _ => Expr::binary(
            hype_core::model::BinOp::Mul,
            Expr::num(0.25),
            Expr::num(2.0),
        ),
    }
}

#[derive(Debug, Clone)]
struct EdgeSpec {
    src: usize,
    tgt: usize,
    event: usize,
    weight: usize,
    guarded: bool,
}

/// A random automaton over variables drawn from `x`, `y`, `z`, with modes
/// labelled `{prefix}{i}`. Resets and initial points are empty, so any two
/// such automata are compatible; stochastic rates depend only on the event.
pub fn automaton(prefix: &'static str) -> impl Strategy<Value = Tdsha> {
    (
        1usize..=3,
        proptest::sample::subsequence(vec!["x", "y", "z"], 1..=3),
    )
        .prop_flat_map(move |(n, vars)| {
            let nv = vars.len();
            let flow = (
                0..n,
                proptest::collection::vec(-1i32..=2, nv),
                0..nv + 1,
                -3i32..=3,
            );
            let edge = (
                0..n,
                0..n,
                0..INST.len() + STOCH.len(),
                0..WEIGHTS.len(),
                any::<bool>(),
            )
                .prop_map(|(src, tgt, event, weight, guarded)| EdgeSpec {
                    src,
                    tgt,
                    event,
                    weight,
                    guarded,
                });
            (
                Just(n),
                Just(vars),
                proptest::collection::vec(flow, 0..=4),
                proptest::collection::vec(edge, 0..=6),
                0..n,
            )
        })
        .prop_map(move |(n, vars, flows, edges, init)| {
            let variables: Vec<String> = vars.iter().map(|v| v.to_string()).collect();
            let flows = flows
                .into_iter()
                .map(|(mode, stoich, rv, c)| Flow {
                    mode,
                    stoich: stoich.into_iter().map(f64::from).collect(),
                    rate: if rv < variables.len() {
                        Expr::binary(
                            hype_core::model::BinOp::Mul,
                            Expr::num(f64::from(c)),
                            Expr::var(&variables[rv]),
                        )
                    } else {
                        Expr::num(f64::from(c))
                    },
                })
                .collect();
            let guard = |g: bool| {
                if g {
                    Expr::cmp(CmpOp::Ge, Expr::var(&variables[0]), Expr::num(1.0))
                } else {
                    Expr::Bool(true)
                }
            };
            let mut instantaneous = Vec::new();
            let mut stochastic = Vec::new();
            let mut events_d = BTreeSet::new();
            let mut events_s = BTreeSet::new();
            for e in edges {
                if e.event < INST.len() {
                    let name = INST[e.event].to_string();
                    events_d.insert(name.clone());
                    instantaneous.push(Instantaneous {
                        src: e.src,
                        tgt: e.tgt,
                        guard: guard(e.guarded),
                        reset: vec![],
                        weight: WEIGHTS[e.weight],
                        event: name,
                    });
                } else {
                    let name = STOCH[e.event - INST.len()];
                    events_s.insert(name.to_string());
                    stochastic.push(Stochastic {
                        src: e.src,
                        tgt: e.tgt,
                        guard: guard(e.guarded),
                        reset: vec![],
                        rate: stoch_rate(name),
                        event: name.to_string(),
                    });
                }
            }
            Tdsha {
                modes: (0..n)
                    .map(|i| ModeLabel::Controller(format!("{prefix}{i}")))
                    .collect(),
                variables,
                flows,
                instantaneous,
                stochastic,
                events_d,
                events_s,
                init: Init {
                    mode: init,
                    point: vec![],
                },
            }
        })
}

/// Two random automata and a synchronization set drawn from their shared
/// events.
pub fn automaton_pair() -> impl Strategy<Value = (Tdsha, Tdsha, BTreeSet<String>)> {
    (automaton("p"), automaton("q")).prop_flat_map(|(a, b)| {
        let shared: Vec<String> = a.events().intersection(&b.events()).cloned().collect();
        let len = shared.len();
        (
            Just(a),
            Just(b),
            proptest::sample::subsequence(shared, 0..=len).prop_map(|s| s.into_iter().collect()),
        )
    })
}

/// A guarded controller body over events `a`..`d` that may recurse on `M`.
pub fn controller_body() -> impl Strategy<Value = CtrlTerm> {
    let event = proptest::sample::select(vec!["a", "b", "c", "d"]);
    let leaf = prop_oneof![Just(CtrlTerm::Nil), Just(CtrlTerm::name("M"))];
    let inner = leaf.prop_recursive(4, 16, 2, move |inner| {
        prop_oneof![
            (event.clone(), inner.clone()).prop_map(|(e, t)| CtrlTerm::prefix(e, t)),
            (inner.clone(), inner).prop_map(|(a, b)| CtrlTerm::sum(a, b)),
        ]
    });
    let event = proptest::sample::select(vec!["a", "b", "c", "d"]);
    // every summand at the top is a prefix, so unfolding `M` is guarded
    proptest::collection::vec((event, inner), 1..=3).prop_map(|ps| {
        let mut it = ps.into_iter().map(|(e, t)| CtrlTerm::prefix(e, t));
        let first = it.next().unwrap();
        it.fold(first, CtrlTerm::sum)
    })
}

pub fn bodies(m: CtrlTerm) -> BTreeMap<String, CtrlTerm> {
    BTreeMap::from([("M".to_string(), m)])
}
