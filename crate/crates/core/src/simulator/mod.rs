//! PDMP execution of a [`Tdsha`].
//!
//! Within a mode the state follows the mode's ODEs, integrated with
//! Dormand–Prince 5(4). The state vector is augmented with one cumulative
//! hazard `Λ_e` per stochastic label leaving the mode; label `e` fires when
//! `Λ_e` reaches a threshold `ξ_e ~ Exp(1)`. Instantaneous transitions fire
//! as soon as their guard holds. All clocks restart after every jump.
//!
//! Run `i` of seed `s` draws from ChaCha8 seeded with `s` on stream `i`;
//! [`simulate`] is run 0.

mod ensemble;
mod guard;
pub mod rk45;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EvalError, IndexedExpr};
use crate::tdsha::Tdsha;

pub use ensemble::{
    run_ensemble, run_ensemble_with, EnsembleSummary, EventStats, ModeOccupancy, RunSummary,
};
pub use guard::Guard;
pub use trace::{Jump, JumpKind, Sample, Termination, Trace};

use rk45::{Rhs, Step, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Root location tolerance, in time.
    pub guard_tol: f64,
    /// Longest chain of instantaneous jumps allowed without time passing.
    pub chain_limit: usize,
    /// Record every `stride`-th accepted step.
    pub stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            t_end: 100.0,
            rtol: 1e-8,
            atol: 1e-10,
            max_step: 1.0,
            guard_tol: 1e-9,
            chain_limit: 1000,
            stride: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("t_end", self.t_end),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("max_step", self.max_step),
            ("guard_tol", self.guard_tol),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 || (name != "max_step" && v.is_infinite()) {
                return Err(SimError::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.chain_limit == 0 {
            return Err(SimError::Config("chain_limit must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(SimError::Config("stride must be at least 1".into()));
        }
        Ok(())
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rtol: self.rtol,
            atol: self.atol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot prepare automaton: {0}")]
    Prepare(String),
    #[error("cannot evaluate initial point: {0}")]
    InitialPoint(EvalError),
}

#[derive(Debug, Clone)]
struct Reset {
    assign: Vec<(usize, IndexedExpr)>,
}

impl Reset {
    fn new(r: &[crate::model::Assignment], vars: &[String]) -> Result<Self, SimError> {
        let assign = r
            .iter()
            .map(|a| {
                let i = vars.iter().position(|v| *v == a.var).ok_or_else(|| {
                    SimError::Prepare(format!("reset of unknown variable `{}`", a.var))
                })?;
                let e = a
                    .value
                    .index(vars)
                    .map_err(|e| SimError::Prepare(e.to_string()))?;
                Ok((i, e))
            })
            .collect::<Result<_, SimError>>()?;
        Ok(Reset { assign })
    }

    /// Simultaneous assignment: every right-hand side sees `x`.
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let values = self
            .assign
            .iter()
            .map(|(_, e)| e.eval_real(x))
            .collect::<Result<Vec<_>, _>>()?;
        let mut out = x.to_vec();
        for ((i, _), v) in self.assign.iter().zip(values) {
            out[*i] = v;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
struct InstEdge {
    tgt: usize,
    event: String,
    guard: Guard,
    reset: Reset,
    weight: f64,
}

#[derive(Debug, Clone)]
struct StochEdge {
    tgt: usize,
    guard: Guard,
    reset: Reset,
}

#[derive(Debug, Clone)]
struct Label {
    event: String,
    rate: IndexedExpr,
    edges: Vec<StochEdge>,
    always_enabled: bool,
}

#[derive(Debug, Clone)]
struct Mode {
    flows: Vec<(IndexedExpr, Vec<(usize, f64)>)>,
    inst: Vec<InstEdge>,
    /// Sorted by event name.
    labels: Vec<Label>,
}

/// A [`Tdsha`] prepared for repeated simulation. Immutable and shareable
/// between threads.
#[derive(Debug, Clone)]
pub struct Simulator {
    variables: Vec<String>,
    mode_names: Vec<String>,
    modes: Vec<Mode>,
    init_mode: usize,
    x0: Vec<f64>,
}

/// Runtime failure inside one run.
#[derive(Debug)]
struct Failure(String);

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure(e.to_string())
    }
}

struct ModeRhs<'a> {
    mode: &'a Mode,
    n: usize,
}

impl Rhs for ModeRhs<'_> {
    type Error = Failure;

    fn eval(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<(), Failure> {
        let x = &y[..self.n];
        dy.fill(0.0);
        for (rate, stoich) in &self.mode.flows {
            let v = rate.eval_real(x)?;
            for &(j, c) in stoich {
                dy[j] += c * v;
            }
        }
        for (k, label) in self.mode.labels.iter().enumerate() {
            let r = label.rate.eval_real(x)?;
            if !r.is_finite() {
                return Err(Failure(format!(
                    "rate of `{}` is not finite ({r})",
                    label.event
                )));
            }
            if r < 0.0 {
                return Err(Failure(format!(
                    "negative rate {r} for event `{}`",
                    label.event
                )));
            }
            let enabled = label.always_enabled || {
                let mut any = false;
                for e in &label.edges {
                    if e.guard.holds(x)? {
                        any = true;
                        break;
                    }
                }
                any
            };
            dy[self.n + k] = if enabled { r } else { 0.0 };
        }
        Ok(())
    }
}

/// Which jump ends a continuous segment.
enum Next {
    Inst(Vec<usize>),
    Stoch(usize),
}

struct Run<'a> {
    sim: &'a Simulator,
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    t: f64,
    mode: usize,
    x: Vec<f64>,
    lam: Vec<f64>,
    xi: Vec<f64>,
    clock_start: f64,
    trace: Trace,
}

impl Simulator {
    pub fn new(t: &Tdsha) -> Result<Self, SimError> {
        let vars = &t.variables;
        let n = vars.len();
        let prep =
            |e: &crate::model::Expr| e.index(vars).map_err(|e| SimError::Prepare(e.to_string()));
        let mut modes: Vec<Mode> = (0..t.modes.len())
            .map(|_| Mode {
                flows: Vec::new(),
                inst: Vec::new(),
                labels: Vec::new(),
            })
            .collect();
        for f in &t.flows {
            if f.stoich.len() != n {
                return Err(SimError::Prepare(
                    "flow stoichiometry does not match the variables".into(),
                ));
            }
            let stoich = f
                .stoich
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, c)| (j, *c))
                .collect();
            modes[f.mode].flows.push((prep(&f.rate)?, stoich));
        }
        for d in &t.instantaneous {
            let guard = Guard::new(&d.guard, vars).map_err(|e| SimError::Prepare(e.to_string()))?;
            modes[d.src].inst.push(InstEdge {
                tgt: d.tgt,
                event: d.event.clone(),
                guard,
                reset: Reset::new(&d.reset, vars)?,
                weight: d.weight,
            });
        }
        for s in &t.stochastic {
            let guard = Guard::new(&s.guard, vars).map_err(|e| SimError::Prepare(e.to_string()))?;
            let edge = StochEdge {
                tgt: s.tgt,
                guard,
                reset: Reset::new(&s.reset, vars)?,
            };
            let labels = &mut modes[s.src].labels;
            match labels.iter_mut().find(|l| l.event == s.event) {
                Some(l) => {
                    l.always_enabled |= edge.guard.is_trivially_true();
                    l.edges.push(edge);
                }
                None => labels.push(Label {
                    event: s.event.clone(),
                    rate: prep(&s.rate)?,
                    always_enabled: edge.guard.is_trivially_true(),
                    edges: vec![edge],
                }),
            }
        }
        for m in &mut modes {
            m.labels.sort_by(|a, b| a.event.cmp(&b.event));
        }
        let x0 = t.initial_point().map_err(SimError::InitialPoint)?;
        Ok(Simulator {
            variables: vars.clone(),
            mode_names: t.modes.iter().map(|l| l.to_string()).collect(),
            modes,
            init_mode: t.init.mode,
            x0,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn mode_names(&self) -> &[String] {
        &self.mode_names
    }

    /// Simulates run `run` of `cfg.seed`.
    pub fn run(&self, cfg: &SimConfig, run: u64) -> Result<Trace, SimError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(run);
        let mut r = Run {
            sim: self,
            cfg,
            rng,
            t: 0.0,
            mode: self.init_mode,
            x: self.x0.clone(),
            lam: Vec::new(),
            xi: Vec::new(),
            clock_start: 0.0,
            trace: Trace {
                variables: self.variables.clone(),
                modes: self.mode_names.clone(),
                samples: Vec::new(),
                jumps: Vec::new(),
                termination: Termination::Horizon,
                seed: cfg.seed,
                run,
                t_end: cfg.t_end,
                steps_accepted: 0,
                steps_rejected: 0,
            },
        };
        r.trace.termination = r.go();
        Ok(r.trace)
    }
}

pub fn simulate(t: &Tdsha, cfg: &SimConfig) -> Result<Trace, SimError> {
    Simulator::new(t)?.run(cfg, 0)
}

impl Run<'_> {
    fn n(&self) -> usize {
        self.sim.variables.len()
    }

    fn mode(&self) -> &Mode {
        &self.sim.modes[self.mode]
    }

    fn sample(&mut self, event: Option<String>) {
        self.trace.samples.push(Sample {
            t: self.t,
            mode: self.mode,
            x: self.x.clone(),
            event,
        });
    }

    fn restart_clocks(&mut self) {
        let k = self.sim.modes[self.mode].labels.len();
        let rng = &mut self.rng;
        self.xi = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        self.lam = vec![0.0; k];
        self.clock_start = self.t;
    }

    fn go(&mut self) -> Termination {
        self.sample(None);
        self.restart_clocks();
        match self.settle(0) {
            Ok(None) => {}
            Ok(Some(term)) => return term,
            Err(Failure(m)) => return self.fail(m),
        }
        loop {
            if self.t >= self.cfg.t_end {
                return Termination::Horizon;
            }
            match self.segment() {
                Ok(None) => {}
                Ok(Some(term)) => return term,
                Err(Failure(m)) => return self.fail(m),
            }
        }
    }

    fn fail(&self, message: String) -> Termination {
        Termination::NumericFailure { t: self.t, message }
    }

    fn field(&self, x: &[f64]) -> Result<Vec<f64>, Failure> {
        let rhs = ModeRhs {
            mode: self.mode(),
            n: self.n(),
        };
        let k = self.mode().labels.len();
        let mut y = x.to_vec();
        y.resize(x.len() + k, 0.0);
        let mut dy = vec![0.0; y.len()];
        rhs.eval(self.t, &y, &mut dy)?;
        dy.truncate(x.len());
        Ok(dy)
    }

    /// Fires instantaneous transitions whose guards already hold, until
    /// none do. `chain` counts jumps already made at this instant.
    fn settle(&mut self, mut chain: usize) -> Result<Option<Termination>, Failure> {
        loop {
            let dx = self.field(&self.x)?;
            let mut enabled = Vec::new();
            for (i, e) in self.mode().inst.iter().enumerate() {
                if e.guard.holds_on_entry(&self.x, &dx)? {
                    enabled.push(i);
                }
            }
            if enabled.is_empty() {
                return Ok(None);
            }
            if chain >= self.cfg.chain_limit {
                return Ok(Some(Termination::ChainLimitExceeded {
                    t: self.t,
                    jumps: chain,
                }));
            }
            self.fire_instantaneous(&enabled)?;
            chain += 1;
        }
    }

    fn fire_instantaneous(&mut self, enabled: &[usize]) -> Result<(), Failure> {
        let total: f64 = enabled.iter().map(|&i| self.mode().inst[i].weight).sum();
        let pick = if enabled.len() == 1 {
            enabled[0]
        } else {
            let mut u = self.rng.random::<f64>() * total;
            let mut chosen = *enabled.last().unwrap();
            for &i in enabled {
                let w = self.mode().inst[i].weight;
                if u < w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        };
        let edge = &self.sim.modes[self.mode].inst[pick];
        let after = edge.reset.apply(&self.x)?;
        let (tgt, event) = (edge.tgt, edge.event.clone());
        self.jump(JumpKind::Instantaneous, event, tgt, after);
        Ok(())
    }

    fn jump(&mut self, kind: JumpKind, event: String, tgt: usize, after: Vec<f64>) {
        self.trace.jumps.push(Jump {
            t: self.t,
            kind,
            event: event.clone(),
            src: self.mode,
            dst: tgt,
            x_before: self.x.clone(),
            x_after: after.clone(),
            clock_start: self.clock_start,
        });
        self.mode = tgt;
        self.x = after;
        self.sample(Some(event));
        self.restart_clocks();
    }

    /// Integrates from the current state until the next jump or the horizon.
    fn segment(&mut self) -> Result<Option<Termination>, Failure> {
        let sim = self.sim;
        let cfg = self.cfg;
        let n = self.n();
        let mode = &sim.modes[self.mode];
        let rhs = ModeRhs { mode, n };
        let tol = cfg.tolerances();
        let mut y = self.x.clone();
        y.extend_from_slice(&self.lam);
        let mut f0 = vec![0.0; y.len()];
        rhs.eval(self.t, &y, &mut f0)?;
        let mut h = rk45::initial_step(
            &rhs,
            self.t,
            &y,
            &f0,
            tol,
            cfg.max_step.min(cfg.t_end - self.t),
        )?;
        let mut accepted = 0usize;
        loop {
            let remaining = cfg.t_end - self.t;
            h = h.min(cfg.max_step).min(remaining);
            let s = rk45::step(&rhs, self.t, &y, &f0, h, tol)?;
            if !s.err.is_finite() || s.err > 1.0 {
                self.trace.steps_rejected += 1;
                h *= if s.err.is_finite() {
                    rk45::next_factor(s.err)
                } else {
                    0.2
                };
                if h <= f64::EPSILON * self.t.abs().max(1.0) {
                    return Err(Failure(format!("step size underflow at t = {}", self.t)));
                }
                continue;
            }
            if s.y1.iter().any(|v| !v.is_finite()) {
                return Err(Failure(format!("non-finite state at t = {}", s.t1())));
            }
            self.trace.steps_accepted += 1;
            if let Some((te, next)) = self.locate(mode, &s)? {
                let at = s.at(te);
                self.t = te;
                self.x = at[..n].to_vec();
                self.lam = at[n..].to_vec();
                self.sample(None);
                match next {
                    Next::Inst(enabled) => self.fire_instantaneous(&enabled)?,
                    Next::Stoch(k) => {
                        if !self.fire_stochastic(k)? {
                            return Ok(None);
                        }
                    }
                }
                return self.settle(1);
            }
            accepted += 1;
            let at_end = remaining <= h;
            self.t = if at_end { cfg.t_end } else { s.t1() };
            self.x = s.y1[..n].to_vec();
            y = s.y1.clone();
            f0 = s.f1.clone();
            if at_end || accepted.is_multiple_of(cfg.stride) {
                self.sample(None);
            }
            if at_end {
                return Ok(None);
            }
            h *= rk45::next_factor(s.err);
        }
    }

    /// Earliest jump inside an accepted step; instantaneous wins ties.
    fn locate(&self, mode: &Mode, s: &Step) -> Result<Option<(f64, Next)>, Failure> {
        let tol = self.cfg.guard_tol;
        let n = self.n();
        let mut best_inst: Option<f64> = None;
        let mut times = Vec::with_capacity(mode.inst.len());
        if !mode.inst.is_empty() {
            const SUB: usize = 8;
            let ts: Vec<f64> = (0..=SUB)
                .map(|k| {
                    if k == SUB {
                        s.t1()
                    } else {
                        s.t0 + s.h * k as f64 / SUB as f64
                    }
                })
                .collect();
            let samples: Vec<Vec<f64>> = ts.iter().map(|&t| s.at(t)[..n].to_vec()).collect();
            for e in &mode.inst {
                let t = e.guard.first_true(s, &ts, &samples, tol)?;
                if let Some(t) = t {
                    best_inst = Some(best_inst.map_or(t, |b: f64| b.min(t)));
                }
                times.push(t);
            }
        }
        let mut best_stoch: Option<(f64, usize)> = None;
        for k in 0..mode.labels.len() {
            let i = n + k;
            if s.y1[i] >= self.xi[k] {
                let xi = self.xi[k];
                let t = guard::bisect(s.t0, s.t1(), tol, |t| Ok(s.component_at(t, i) >= xi))?;
                if best_stoch.is_none_or(|(b, _)| t < b) {
                    best_stoch = Some((t, k));
                }
            }
        }
        Ok(match (best_inst, best_stoch) {
            (Some(ti), stoch) if stoch.is_none_or(|(ts, _)| ti <= ts) => {
                let enabled = times
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.is_some_and(|t| t <= ti + tol))
                    .map(|(i, _)| i)
                    .collect();
                Some((ti, Next::Inst(enabled)))
            }
            (_, Some((ts, k))) => Some((ts, Next::Stoch(k))),
            _ => None,
        })
    }

    /// Fires label `k`; returns false if no transition of the label is
    /// enabled at the firing state, in which case only its clock restarts.
    fn fire_stochastic(&mut self, k: usize) -> Result<bool, Failure> {
        let label = &self.sim.modes[self.mode].labels[k];
        let mut enabled = Vec::new();
        for (i, e) in label.edges.iter().enumerate() {
            if e.guard.holds(&self.x)? {
                enabled.push(i);
            }
        }
        if enabled.is_empty() {
            self.xi[k] = self.rng.sample::<f64, _>(Exp1);
            self.lam[k] = 0.0;
            return Ok(false);
        }
        let pick = if enabled.len() == 1 {
            enabled[0]
        } else {
            enabled[self.rng.random_range(0..enabled.len())]
        };
        let edge = &label.edges[pick];
        let after = edge.reset.apply(&self.x)?;
        let (tgt, event) = (edge.tgt, label.event.clone());
        self.jump(JumpKind::Stochastic, event, tgt, after);
        Ok(true)
    }
}
