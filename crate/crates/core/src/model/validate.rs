//! Well-definedness checks on parsed models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::expr::Type;
use super::{
    derivative_set, CompositionTree, ControllerBody, ControllerStateError, CtrlTerm, EventKind,
    Expr, HypeModel, Span, INIT_EVENT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    DuplicateDefinition,
    UndeclaredIdentifier,
    ArityMismatch,
    NonSelfLooping,
    MissingInit,
    DuplicateInit,
    MixedInfluenceNames,
    InfluenceNotPrivate,
    NonConstantStrength,
    DuplicateBranchEvent,
    MissingEventCondition,
    UncontrolledEvent,
    UnsyncedSharedEvent,
    ConditionKindMismatch,
    TypeError,
    DuplicateResetTarget,
    UnresolvedController,
    UnguardedRecursion,
    MisplacedInit,
    CyclicDefinition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
    pub span: Span,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

struct Checker<'a> {
    m: &'a HypeModel,
    out: Vec<Violation>,
    vars: BTreeSet<&'a str>,
    consts: BTreeSet<&'a str>,
    events: BTreeSet<String>,
}

impl<'a> Checker<'a> {
    fn report(&mut self, kind: ViolationKind, span: Span, message: impl Into<String>) {
        self.out.push(Violation {
            kind,
            message: message.into(),
            span,
        });
    }

    fn check_event_declared(&mut self, event: &str, span: Span) {
        if !self.events.contains(event) {
            self.report(
                ViolationKind::MissingEventCondition,
                span,
                format!("event `{event}` has no event condition"),
            );
        }
    }

    /// Free variables must be model variables or constants.
    fn check_names(&mut self, e: &Expr, span: Span, what: &str) {
        for v in e.free_vars() {
            if !self.vars.contains(v.as_str()) && !self.consts.contains(v.as_str()) {
                self.report(
                    ViolationKind::UndeclaredIdentifier,
                    span,
                    format!("undeclared identifier `{v}` in {what}"),
                );
            }
        }
    }

    fn check_type(&mut self, e: &Expr, want: Type, span: Span, what: &str) -> bool {
        match e.infer_type() {
            Ok(t) if t == want => true,
            Ok(t) => {
                self.report(
                    ViolationKind::TypeError,
                    span,
                    format!("{what} must be {want}, found {t}"),
                );
                false
            }
            Err(err) => {
                self.report(ViolationKind::TypeError, span, format!("{what}: {err}"));
                false
            }
        }
    }

    fn namespaces(&mut self) {
        let m = self.m;
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        let mut decls: Vec<(&str, &str, Span)> = Vec::new();
        decls.extend(
            m.variables
                .iter()
                .map(|v| (v.name.as_str(), "variable", v.span)),
        );
        decls.extend(
            m.constants
                .iter()
                .map(|c| (c.name.as_str(), "constant", c.span)),
        );
        decls.extend(
            m.types
                .iter()
                .map(|t| (t.name.as_str(), "influence type", t.span)),
        );
        decls.extend(
            m.influence_vars
                .iter()
                .map(|i| (i.influence.as_str(), "influence name", i.span)),
        );
        decls.extend(
            m.subcomponents
                .iter()
                .map(|s| (s.name.as_str(), "subcomponent", s.span)),
        );
        decls.extend(
            m.components
                .iter()
                .map(|c| (c.name.as_str(), "component", c.span)),
        );
        decls.extend(
            m.controllers
                .iter()
                .map(|c| (c.name.as_str(), "controller", c.span)),
        );
        decls.extend(
            m.conditions
                .iter()
                .map(|(e, c)| (e.as_str(), "event", c.span)),
        );
        for (name, what, span) in decls {
            if let Some(prev) = seen.insert(name, what) {
                self.report(
                    ViolationKind::DuplicateDefinition,
                    span,
                    format!("`{name}` is already defined as a {prev}"),
                );
            }
        }
    }

    fn influence_vars(&mut self) {
        for iv in &self.m.influence_vars {
            if !self.vars.contains(iv.variable.as_str()) {
                self.report(
                    ViolationKind::UndeclaredIdentifier,
                    iv.span,
                    format!(
                        "iv({}) names undeclared variable `{}`",
                        iv.influence, iv.variable
                    ),
                );
            }
        }
    }

    fn types(&mut self) {
        for t in &self.m.types {
            for v in t.body.free_vars() {
                if !t.params.contains(&v) && !self.consts.contains(v.as_str()) {
                    self.report(
                        ViolationKind::UndeclaredIdentifier,
                        t.span,
                        format!(
                            "influence type `{}` mentions `{v}`, which is not a parameter",
                            t.name
                        ),
                    );
                }
            }
            self.check_type(
                &t.body,
                Type::Real,
                t.span,
                &format!("influence type `{}`", t.name),
            );
        }
    }

    fn subcomponents(&mut self) {
        let m = self.m;
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for s in &m.subcomponents {
            for p in &s.params {
                if !self.vars.contains(p.as_str()) {
                    self.report(
                        ViolationKind::UndeclaredIdentifier,
                        s.span,
                        format!("parameter `{p}` of `{}` is not a declared variable", s.name),
                    );
                }
            }
            let inits = s.branches.iter().filter(|b| b.event == INIT_EVENT).count();
            if inits == 0 {
                self.report(
                    ViolationKind::MissingInit,
                    s.span,
                    format!("subcomponent `{}` has no init branch", s.name),
                );
            } else if inits > 1 {
                self.report(
                    ViolationKind::DuplicateInit,
                    s.span,
                    format!("subcomponent `{}` has more than one init branch", s.name),
                );
            }
            let mut names: BTreeSet<&str> = BTreeSet::new();
            let mut seen_events: BTreeSet<&str> = BTreeSet::new();
            for b in &s.branches {
                let self_loop =
                    b.target == s.name && (b.target_args.is_empty() || b.target_args == s.params);
                if !self_loop {
                    self.report(
                        ViolationKind::NonSelfLooping,
                        b.span,
                        format!(
                            "branch `{}` of `{}` continues as `{}`; subcomponents must be self-looping",
                            b.event, s.name, b.target
                        ),
                    );
                }
                if b.event != INIT_EVENT && !seen_events.insert(b.event.as_str()) {
                    self.report(
                        ViolationKind::DuplicateBranchEvent,
                        b.span,
                        format!(
                            "event `{}` labels more than one branch of `{}`",
                            b.event, s.name
                        ),
                    );
                }
                self.check_event_declared(&b.event, b.span);
                names.insert(b.influence.name.as_str());
                let infl = &b.influence;
                if m.variable_of(&infl.name).is_none() {
                    self.report(
                        ViolationKind::UndeclaredIdentifier,
                        b.span,
                        format!("influence name `{}` has no iv declaration", infl.name),
                    );
                }
                for v in infl.strength.free_vars() {
                    if !self.consts.contains(v.as_str()) {
                        let kind = if self.vars.contains(v.as_str()) {
                            ViolationKind::NonConstantStrength
                        } else {
                            ViolationKind::UndeclaredIdentifier
                        };
                        self.report(
                            kind,
                            b.span,
                            format!("influence strength mentions `{v}`, which is not a constant"),
                        );
                    }
                }
                self.check_type(&infl.strength, Type::Real, b.span, "influence strength");
                match m.influence_type(&infl.itype.name) {
                    None => self.report(
                        ViolationKind::UndeclaredIdentifier,
                        b.span,
                        format!("influence type `{}` is not declared", infl.itype.name),
                    ),
                    Some(t) if t.params.len() != infl.itype.args.len() => self.report(
                        ViolationKind::ArityMismatch,
                        b.span,
                        format!(
                            "influence type `{}` takes {} argument(s), {} given",
                            t.name,
                            t.params.len(),
                            infl.itype.args.len()
                        ),
                    ),
                    Some(_) => {}
                }
                for a in &infl.itype.args {
                    if !s.params.contains(a) && !self.vars.contains(a.as_str()) {
                        self.report(
                            ViolationKind::UndeclaredIdentifier,
                            b.span,
                            format!("`{a}` is not a variable"),
                        );
                    }
                }
            }
            if names.len() > 1 {
                self.report(
                    ViolationKind::MixedInfluenceNames,
                    s.span,
                    format!(
                        "subcomponent `{}` uses several influence names ({}); it must own exactly one",
                        s.name,
                        names.iter().copied().collect::<Vec<_>>().join(", ")
                    ),
                );
            }
            for n in names {
                match owner.get(n) {
                    Some(other) if *other != s.name => self.report(
                        ViolationKind::InfluenceNotPrivate,
                        s.span,
                        format!(
                            "influence name not private: `{n}` is used by `{other}` and `{}`",
                            s.name
                        ),
                    ),
                    _ => {
                        owner.insert(n, s.name.as_str());
                    }
                }
            }
        }
    }

    fn uncontrolled_tree(&mut self, tree: &CompositionTree, stack: &mut Vec<String>) {
        match tree {
            CompositionTree::Leaf { name, args, span } => {
                if let Some(s) = self.m.subcomponent(name) {
                    if !args.is_empty() && args.len() != s.params.len() {
                        self.report(
                            ViolationKind::ArityMismatch,
                            *span,
                            format!(
                                "`{name}` takes {} argument(s), {} given",
                                s.params.len(),
                                args.len()
                            ),
                        );
                    }
                    if args.is_empty() && !s.params.is_empty() {
                        self.report(
                            ViolationKind::ArityMismatch,
                            *span,
                            format!("`{name}` takes {} argument(s), none given", s.params.len()),
                        );
                    }
                    for a in args {
                        if !self.vars.contains(a.as_str()) {
                            self.report(
                                ViolationKind::UndeclaredIdentifier,
                                *span,
                                format!("`{a}` is not a declared variable"),
                            );
                        }
                    }
                } else if let Some(c) = self.m.component(name) {
                    if stack.contains(name) {
                        self.report(
                            ViolationKind::CyclicDefinition,
                            *span,
                            format!("component `{name}` is defined in terms of itself"),
                        );
                        return;
                    }
                    if !args.is_empty() {
                        self.report(
                            ViolationKind::ArityMismatch,
                            *span,
                            format!("component `{name}` takes no arguments"),
                        );
                    }
                    stack.push(name.clone());
                    let inner = c.tree.clone();
                    self.uncontrolled_tree(&inner, stack);
                    stack.pop();
                } else {
                    self.report(
                        ViolationKind::UndeclaredIdentifier,
                        *span,
                        format!("`{name}` is not a subcomponent or component"),
                    );
                }
            }
            CompositionTree::Sync {
                left,
                right,
                events,
                span,
            } => {
                self.uncontrolled_tree(left, stack);
                self.uncontrolled_tree(right, stack);
                self.sync_set(events, *span);
                let l = self.m.uncontrolled_events(left);
                let r = self.m.uncontrolled_events(right);
                self.shared_events(&l, &r, events, *span);
            }
        }
    }

    fn controller_tree(&mut self, tree: &CompositionTree, stack: &mut Vec<String>) {
        match tree {
            CompositionTree::Leaf { name, args, span } => {
                if !args.is_empty() {
                    self.report(
                        ViolationKind::ArityMismatch,
                        *span,
                        format!("controller `{name}` takes no arguments"),
                    );
                }
                match self.m.controller(name).map(|c| c.body.clone()) {
                    None => self.report(
                        ViolationKind::UnresolvedController,
                        *span,
                        format!("controller `{name}` is not defined"),
                    ),
                    Some(ControllerBody::Sequential(_)) => {}
                    Some(ControllerBody::Composite(inner)) => {
                        if stack.contains(name) {
                            self.report(
                                ViolationKind::CyclicDefinition,
                                *span,
                                format!("controller `{name}` is defined in terms of itself"),
                            );
                            return;
                        }
                        stack.push(name.clone());
                        self.controller_tree(&inner, stack);
                        stack.pop();
                    }
                }
            }
            CompositionTree::Sync {
                left,
                right,
                events,
                span,
            } => {
                self.controller_tree(left, stack);
                self.controller_tree(right, stack);
                self.sync_set(events, *span);
                let l = self.m.controller_events(left);
                let r = self.m.controller_events(right);
                self.shared_events(&l, &r, events, *span);
            }
        }
    }

    fn sync_set(&mut self, events: &BTreeSet<String>, span: Span) {
        for e in events {
            self.check_event_declared(e, span);
        }
    }

    fn shared_events(
        &mut self,
        left: &BTreeSet<String>,
        right: &BTreeSet<String>,
        sync: &BTreeSet<String>,
        span: Span,
    ) {
        for e in left.intersection(right) {
            if !sync.contains(e) {
                self.report(
                    ViolationKind::UnsyncedSharedEvent,
                    span,
                    format!("event `{e}` occurs on both sides but is missing from the synchronization set"),
                );
            }
        }
    }

    fn controllers(&mut self) {
        let bodies = self.m.controller_bodies();
        for c in &self.m.controllers {
            match &c.body {
                ControllerBody::Sequential(t) => {
                    let mut evs = BTreeSet::new();
                    t.events(&mut evs);
                    for e in &evs {
                        if e == INIT_EVENT {
                            self.report(
                                ViolationKind::MisplacedInit,
                                c.span,
                                format!("controller `{}` uses init; init only prefixes the controller of the system", c.name),
                            );
                        }
                        self.check_event_declared(e, c.span);
                    }
                    let mut names = BTreeSet::new();
                    t.names(&mut names);
                    for n in names {
                        if !bodies.contains_key(&n) {
                            self.report(
                                ViolationKind::UnresolvedController,
                                c.span,
                                format!("`{n}` is not a sequential controller"),
                            );
                        }
                    }
                    if let Err(ControllerStateError::Unguarded(n)) =
                        derivative_set(&CtrlTerm::Name(c.name.clone()), &bodies)
                    {
                        self.report(
                            ViolationKind::UnguardedRecursion,
                            c.span,
                            format!("controller `{n}` recurses without an event prefix"),
                        );
                    }
                }
                ControllerBody::Composite(_) => {}
            }
        }
    }

    fn system(&mut self) {
        let sys = &self.m.system;
        self.uncontrolled_tree(&sys.uncontrolled, &mut Vec::new());
        self.controller_tree(&sys.controller, &mut Vec::new());
        self.sync_set(&sys.sync, sys.span);
        let sigma = self.m.uncontrolled_events(&sys.uncontrolled);
        let mut con = self.m.controller_events(&sys.controller);
        for e in &sigma {
            if e != INIT_EVENT && !con.contains(e) {
                self.report(
                    ViolationKind::UncontrolledEvent,
                    sys.span,
                    format!("uncontrolled event: `{e}` occurs in the uncontrolled system but not in the controller"),
                );
            }
        }
        con.insert(INIT_EVENT.to_owned());
        self.shared_events(&sigma, &con, &sys.sync, sys.span);
    }

    fn conditions(&mut self) {
        let m = self.m;
        match m.condition(INIT_EVENT) {
            None => self.report(
                ViolationKind::MissingEventCondition,
                sys_span(m),
                "the init event has no event condition",
            ),
            Some(c) if c.kind != EventKind::Instantaneous => self.report(
                ViolationKind::ConditionKindMismatch,
                c.span,
                "init cannot be a stochastic event",
            ),
            Some(_) => {}
        }
        for (event, c) in &m.conditions {
            self.check_names(&c.activation, c.span, &format!("ec({event})"));
            match (c.kind, c.activation.infer_type()) {
                (EventKind::Instantaneous, Ok(Type::Real)) => self.report(
                    ViolationKind::ConditionKindMismatch,
                    c.span,
                    format!("rate expression attached to instantaneous event `{event}`"),
                ),
                (EventKind::Stochastic, Ok(Type::Bool)) => self.report(
                    ViolationKind::ConditionKindMismatch,
                    c.span,
                    format!("guard attached to stochastic event `{event}`; stochastic events take a rate"),
                ),
                (_, Err(err)) => self.report(
                    ViolationKind::TypeError,
                    c.span,
                    format!("ec({event}) activation: {err}"),
                ),
                _ => {}
            }
            let mut targets = BTreeSet::new();
            for a in &c.reset {
                if !self.vars.contains(a.var.as_str()) {
                    self.report(
                        ViolationKind::UndeclaredIdentifier,
                        c.span,
                        format!(
                            "reset of ec({event}) assigns undeclared variable `{}`",
                            a.var
                        ),
                    );
                }
                if !targets.insert(a.var.as_str()) {
                    self.report(
                        ViolationKind::DuplicateResetTarget,
                        c.span,
                        format!("reset of ec({event}) assigns `{}` twice", a.var),
                    );
                }
                self.check_names(&a.value, c.span, &format!("reset of ec({event})"));
                self.check_type(&a.value, Type::Real, c.span, "reset right-hand side");
            }
        }
    }
}

fn sys_span(m: &HypeModel) -> Span {
    m.system.span
}

/// Checks the well-definedness conditions; an empty list means the model is valid.
pub fn validate(model: &HypeModel) -> Vec<Violation> {
    let mut c = Checker {
        m: model,
        out: Vec::new(),
        vars: model.variables.iter().map(|v| v.name.as_str()).collect(),
        consts: model.constants.iter().map(|c| c.name.as_str()).collect(),
        events: model.events(),
    };
    c.namespaces();
    c.influence_vars();
    c.types();
    c.subcomponents();
    c.controllers();
    c.system();
    c.conditions();
    c.out
}
