mod common;

use std::collections::BTreeSet;

use common::load;
use hype_core::compiler::{
    compile, compile_controller, compile_seq_controller, compile_subcomponent,
    compile_uncontrolled, PruneMode,
};
use hype_core::model::{CompositionTree, CtrlTerm, Expr, Span};
use hype_core::tdsha::{assemble_field, prune_unreachable, to_dot, to_json, ModeLabel, Tdsha};

fn leaf(name: &str) -> CompositionTree {
    CompositionTree::Leaf {
        name: name.into(),
        args: vec![],
        span: Span::default(),
    }
}

fn sync(l: CompositionTree, r: CompositionTree, events: &[&str]) -> CompositionTree {
    CompositionTree::Sync {
        left: Box::new(l),
        right: Box::new(r),
        events: events.iter().map(|e| e.to_string()).collect(),
        span: Span::default(),
    }
}

fn field_at(t: &Tdsha, mode: usize, point: &[(&str, f64)]) -> Vec<f64> {
    assemble_field(t, mode)
        .rhs
        .iter()
        .map(|e| e.eval_real(point).unwrap())
        .collect()
}

#[test]
fn downloader_subcomponent() {
    let m = load("downloader.hype");
    let t = compile_subcomponent(m.subcomponent("Dwnldr").unwrap(), &m).unwrap();
    let labels: Vec<String> = t.modes.iter().map(|l| l.to_string()).collect();
    assert_eq!(labels, ["m(dw, r, const)", "m(dw, 0, const)"]);
    assert_eq!(t.init.mode, 0);
    assert!(t.init.point.is_empty());
    assert_eq!(t.flows.len(), 2);
    assert_eq!(t.flows[0].stoich, [1.0]);
    assert_eq!(t.flows[0].rate.to_string(), "1 * 1");
    assert_eq!(t.flows[1].rate.to_string(), "0 * 1");
    assert_eq!(t.stochastic.len(), 4);
    assert!(t.instantaneous.is_empty());
    assert_eq!(field_at(&t, 0, &[("D", 3.0)]), [1.0]);
    assert_eq!(field_at(&t, 1, &[("D", 3.0)]), [0.0]);
}

#[test]
fn cool_and_heat_subcomponents() {
    let m = load("orbiter.hype");
    let cool = compile_subcomponent(m.subcomponent("Cool").unwrap(), &m).unwrap();
    assert_eq!(cool.modes.len(), 1);
    assert_eq!(cool.flows[0].rate.to_string(), "-1 * K");
    assert!(cool.instantaneous.is_empty() && cool.stochastic.is_empty());

    let heat = compile_subcomponent(m.subcomponent("Heat").unwrap(), &m).unwrap();
    assert_eq!(heat.modes.len(), 2);
    assert_eq!(heat.instantaneous.len(), 4);
    // init shares the off influence
    assert_eq!(heat.init.mode, 1);
    assert!(heat
        .instantaneous
        .iter()
        .all(|d| d.guard == Expr::Bool(true) && d.reset.is_empty()));
}

#[test]
fn downloader_controller() {
    let m = load("downloader.hype");
    let t = compile_seq_controller(&CtrlTerm::name("Con_dw"), &m).unwrap();
    assert_eq!(t.modes.len(), 2);
    assert!(t.flows.is_empty());
    let s: Vec<(usize, usize, &str, String, String)> = t
        .stochastic
        .iter()
        .map(|s| {
            let reset: Vec<String> = s.reset.iter().map(|a| a.to_string()).collect();
            (
                s.src,
                s.tgt,
                s.event.as_str(),
                s.rate.to_string(),
                reset.join(" and "),
            )
        })
        .collect();
    assert_eq!(
        s,
        [
            (0, 1, "request", "0.04".to_string(), String::new()),
            (
                1,
                0,
                "completed",
                "0.5 / (10 + D)".to_string(),
                "D' = 0".to_string()
            ),
        ]
    );
    assert_eq!(t.init.point[0].to_string(), "D' = 0");
}

#[test]
fn sun_controller_guards() {
    let m = load("orbiter.hype");
    let t = compile_seq_controller(&CtrlTerm::name("Con_s"), &m).unwrap();
    assert_eq!(t.modes.len(), 2);
    let light = &t.instantaneous[0];
    assert_eq!(
        (light.event.as_str(), light.guard.to_string()),
        ("light", "T = 12".to_string())
    );
    assert!(light.reset.is_empty());
    let dark = &t.instantaneous[1];
    assert_eq!(
        (dark.event.as_str(), dark.guard.to_string()),
        ("dark", "T = 24".to_string())
    );
    assert_eq!(dark.reset[0].to_string(), "T' = 0");
}

#[test]
fn nil_controller() {
    let m = load("orbiter.hype");
    let t = compile_seq_controller(&CtrlTerm::Nil, &m).unwrap();
    assert_eq!(t.modes, [ModeLabel::Controller("0".into())]);
    assert!(t.instantaneous.is_empty() && t.stochastic.is_empty());
}

#[test]
fn uncontrolled_mode_counts() {
    let m = load("orbiter_extended.hype");
    let t = compile_uncontrolled(&m.system.uncontrolled, &m).unwrap();
    assert_eq!(t.modes.len(), 16);
    let two = compile_uncontrolled(&sync(leaf("Heat"), leaf("Shade"), &["init"]), &m).unwrap();
    assert_eq!(two.modes.len(), 4);
    for q in 0..4 {
        assert_eq!(two.flows_in(q).count(), 2);
    }
    let single = compile_uncontrolled(&leaf("Heat"), &m).unwrap();
    assert_eq!(
        single,
        compile_subcomponent(m.subcomponent("Heat").unwrap(), &m).unwrap()
    );
    // guards and resets of the uncontrolled system are all trivial
    assert!(t
        .instantaneous
        .iter()
        .all(|d| d.guard.is_true_literal() && d.reset.is_empty()));
    assert!(t
        .stochastic
        .iter()
        .all(|d| d.guard.is_true_literal() && d.reset.is_empty()));
}

#[test]
fn controller_mode_counts() {
    let m = load("orbiter.hype");
    let t = compile_controller(&leaf("Con"), &m).unwrap();
    assert_eq!(t.modes.len(), 8);
    // nothing synchronized: 2 edges per factor, lifted over 4 modes each
    assert_eq!(t.instantaneous.len(), 3 * 2 * 4);
    let single = compile_controller(&leaf("Con_h"), &m).unwrap();
    assert_eq!(single.modes.len(), 2);
}

#[test]
fn downloader_pipeline_prunes_to_two() {
    let m = load("downloader.hype");
    let (t, report) = compile(&m, PruneMode::Final).unwrap();
    let last = report.final_stage();
    assert_eq!((last.modes_before, last.modes_after), (4, 2));
    assert_eq!(t.modes.len(), 2);
    assert!(report.to_string().contains("4 → 2 (pruned)"));

    let (off, _) = compile(&m, PruneMode::Off).unwrap();
    assert_eq!(off.modes.len(), 4);
    assert_eq!(prune_unreachable(&off), t);
}

#[test]
fn extended_orbiter_compiles() {
    let m = load("orbiter_extended.hype");
    let (t, report) = compile(&m, PruneMode::Final).unwrap();
    let last = report.final_stage();
    assert_eq!(last.modes_before, 16 * 16);
    assert!(last.modes_after < last.modes_before);
    assert_eq!(t.variables, ["K", "T", "D"]);
    assert!(report.defaulted_variables.is_empty());

    let (each, _) = compile(&m, PruneMode::EachStage).unwrap();
    assert_eq!(each.modes.len(), t.modes.len());

    // every synchronized event is fired jointly: no interleaved copies
    let shared = &m.system.sync;
    for d in &t.instantaneous {
        assert!(shared.contains(&d.event));
        let labels_src = t.modes[d.src].components().len();
        assert_eq!(labels_src, 6 + 4);
    }
    // rate consistency
    for s in &t.stochastic {
        let ec = m.condition(&s.event).unwrap();
        assert_eq!(s.rate, m.inline_constants(&ec.activation));
    }
    t.check_well_formed().unwrap();
}

#[test]
fn orbiter_mode_field() {
    let m = load("orbiter_tempdep.hype");
    let (t, _) = compile(&m, PruneMode::Off).unwrap();
    // heater on, shade down, sun light, accumulating data
    let q = t
        .modes
        .iter()
        .position(|l| {
            let parts: Vec<String> = l.components().iter().map(|c| c.to_string()).collect();
            parts[0] == "m(h, r_h, const)"
                && parts[1] == "m(d, 0, const)"
                && parts[2] == "m(s, r_s, const)"
                && parts[5] == "m(dw, r, const)"
        })
        .unwrap();
    let k = 260.0;
    let f = field_at(&t, q, &[("K", k), ("T", 3.0), ("D", 7.0)]);
    assert_eq!(f, [200.0 + 400.0 - k, 1.0, 1.0]);
}

#[test]
fn alpha_renaming_only_changes_labels() {
    let src = common::source("orbiter.hype");
    let renamed = src.replace("Heat", "Heater");
    let a = compile(
        &hype_core::parser::parse_model(&src).unwrap(),
        PruneMode::Final,
    )
    .unwrap()
    .0;
    let b = compile(
        &hype_core::parser::parse_model(&renamed).unwrap(),
        PruneMode::Final,
    )
    .unwrap()
    .0;
    assert_eq!(a.modes, b.modes);
    assert_eq!(a.flows, b.flows);
    assert_eq!(a.instantaneous, b.instantaneous);
}

#[test]
fn exports() {
    let m = load("orbiter_extended.hype");
    let (t, _) = compile(&m, PruneMode::Final).unwrap();
    let json: serde_json::Value = serde_json::from_str(&to_json(&t)).unwrap();
    assert_eq!(json["format"], "tdsha/1");
    assert_eq!(json["modes"].as_array().unwrap().len(), t.modes.len());
    assert_eq!(json["variables"], serde_json::json!(["K", "T", "D"]));
    assert_eq!(
        json["events"]["stochastic"],
        serde_json::json!(["completed", "request"])
    );

    let dot = to_dot(&t);
    assert!(dot.starts_with("digraph tdsha {"));
    assert!(dot.trim_end().ends_with('}'));
    assert_eq!(dot.matches("style=dashed").count(), t.stochastic.len());
    assert_eq!(
        dot.matches(" -> ").count(),
        1 + t.instantaneous.len() + t.stochastic.len()
    );
    // quotes balance on every line
    for line in dot.lines() {
        let unescaped = line.replace("\\\"", "");
        assert_eq!(unescaped.matches('"').count() % 2, 0, "{line}");
    }
}

#[test]
fn init_point_covers_all_variables() {
    let m = load("orbiter.hype");
    let (t, _) = compile(&m, PruneMode::Final).unwrap();
    assert_eq!(t.initial_point().unwrap(), [280.0, 0.0]);
    let vars: BTreeSet<&str> = t.init.point.iter().map(|a| a.var.as_str()).collect();
    assert_eq!(vars, BTreeSet::from(["K", "T"]));
}
