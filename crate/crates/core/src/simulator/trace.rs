//! Simulation traces and their CSV / JSON exports.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpKind {
    Instantaneous,
    Stochastic,
}

impl JumpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            JumpKind::Instantaneous => "instantaneous",
            JumpKind::Stochastic => "stochastic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub mode: usize,
    pub x: Vec<f64>,
    /// Set on the sample taken right after a jump.
    pub event: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub t: f64,
    pub kind: JumpKind,
    pub event: String,
    pub src: usize,
    pub dst: usize,
    pub x_before: Vec<f64>,
    pub x_after: Vec<f64>,
    /// When the hazard clocks were last restarted before this jump.
    pub clock_start: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Termination {
    Horizon,
    ChainLimitExceeded { t: f64, jumps: usize },
    NumericFailure { t: f64, message: String },
}

impl Termination {
    pub fn is_horizon(&self) -> bool {
        matches!(self, Termination::Horizon)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Termination::Horizon => "horizon",
            Termination::ChainLimitExceeded { .. } => "chain-limit-exceeded",
            Termination::NumericFailure { .. } => "numeric-failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub variables: Vec<String>,
    pub modes: Vec<String>,
    pub samples: Vec<Sample>,
    pub jumps: Vec<Jump>,
    pub termination: Termination,
    pub seed: u64,
    pub run: u64,
    pub t_end: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

#[derive(Serialize)]
struct Meta<'a> {
    variables: &'a [String],
    modes: &'a [String],
    seed: u64,
    run: u64,
    t_end: f64,
    termination: &'a Termination,
    samples: usize,
    jumps: usize,
    steps_accepted: usize,
    steps_rejected: usize,
}

impl Trace {
    /// Time the simulation actually reached.
    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn jumps_of<'a>(&'a self, event: &'a str) -> impl Iterator<Item = &'a Jump> + 'a {
        self.jumps.iter().filter(move |j| j.event == event)
    }

    /// `time,mode_id,<vars>,event`, one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,mode_id");
        for v in &self.variables {
            out.push(',');
            out.push_str(v);
        }
        out.push_str(",event\n");
        for s in &self.samples {
            let _ = write!(out, "{:.16e},{}", s.t, s.mode);
            for v in &s.x {
                let _ = write!(out, ",{v:.16e}");
            }
            let _ = writeln!(out, ",{}", s.event.as_deref().unwrap_or(""));
        }
        out
    }

    /// `time,event,kind,src_mode,dst_mode`, one row per jump.
    pub fn events_csv(&self) -> String {
        let mut out = String::from("time,event,kind,src_mode,dst_mode\n");
        for j in &self.jumps {
            let _ = writeln!(
                out,
                "{:.16e},{},{},{},{}",
                j.t,
                j.event,
                j.kind.as_str(),
                j.src,
                j.dst
            );
        }
        out
    }

    pub fn meta_json(&self) -> String {
        let meta = Meta {
            variables: &self.variables,
            modes: &self.modes,
            seed: self.seed,
            run: self.run,
            t_end: self.t_end,
            termination: &self.termination,
            samples: self.samples.len(),
            jumps: self.jumps.len(),
            steps_accepted: self.steps_accepted,
            steps_rejected: self.steps_rejected,
        };
        serde_json::to_string_pretty(&meta).expect("metadata serializes")
    }

    /// Canonical byte serialization used to compare runs.
    pub fn canonical(&self) -> String {
        format!(
            "{}\n{}\n{}",
            self.to_csv(),
            self.events_csv(),
            self.meta_json()
        )
    }

    /// Time spent in each mode, by integrating the piecewise-constant mode
    /// signal over the samples.
    pub fn occupancy(&self) -> Vec<f64> {
        let mut occ = vec![0.0; self.modes.len()];
        for w in self.samples.windows(2) {
            occ[w[0].mode] += w[1].t - w[0].t;
        }
        occ
    }
}
