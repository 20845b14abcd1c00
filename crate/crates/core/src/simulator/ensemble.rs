//! Independent runs in parallel, merged in run-index order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SimConfig, SimError, Simulator, Termination, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStats {
    pub count: usize,
    /// Times between consecutive firings within a run.
    pub inter_count: usize,
    pub inter_mean: f64,
    pub inter_variance: f64,
    /// Times from the last clock restart to the firing.
    pub waiting_mean: f64,
    pub waiting_variance: f64,
    #[serde(skip)]
    pub inter_samples: Vec<f64>,
    #[serde(skip)]
    pub waiting_samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: u64,
    pub termination: Termination,
    pub end_time: f64,
    pub jumps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeOccupancy {
    pub mode: usize,
    pub name: String,
    pub time: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub seed: u64,
    pub runs: usize,
    pub t_end: f64,
    /// Some run stopped before the horizon.
    pub partial: bool,
    pub events: BTreeMap<String, EventStats>,
    pub occupancy: Vec<ModeOccupancy>,
    pub per_run: Vec<RunSummary>,
}

impl EnsembleSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summaries serialize")
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Runs `n_runs` simulations (run indices `0..n_runs`) and maps each trace
/// through `f`, returning results in run order.
pub fn run_ensemble_with<T, F>(
    sim: &Simulator,
    cfg: &SimConfig,
    n_runs: usize,
    f: F,
) -> Result<Vec<T>, SimError>
where
    T: Send,
    F: Fn(Trace) -> T + Sync,
{
    cfg.validate()?;
    if n_runs == 0 {
        return Err(SimError::Config(
            "an ensemble needs at least one run".into(),
        ));
    }
    (0..n_runs as u64)
        .into_par_iter()
        .map(|i| sim.run(cfg, i).map(&f))
        .collect()
}

struct Partial {
    summary: RunSummary,
    occupancy: Vec<f64>,
    inter: BTreeMap<String, Vec<f64>>,
    waiting: BTreeMap<String, Vec<f64>>,
}

fn digest(trace: Trace) -> Partial {
    let mut inter: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut waiting: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut last: BTreeMap<&str, f64> = BTreeMap::new();
    for j in &trace.jumps {
        waiting
            .entry(j.event.clone())
            .or_default()
            .push(j.t - j.clock_start);
        let gaps = inter.entry(j.event.clone()).or_default();
        if let Some(prev) = last.insert(&j.event, j.t) {
            gaps.push(j.t - prev);
        }
    }
    Partial {
        summary: RunSummary {
            run: trace.run,
            termination: trace.termination.clone(),
            end_time: trace.end_time(),
            jumps: trace.jumps.len(),
        },
        occupancy: trace.occupancy(),
        inter,
        waiting,
    }
}

pub fn run_ensemble(
    sim: &Simulator,
    cfg: &SimConfig,
    n_runs: usize,
) -> Result<EnsembleSummary, SimError> {
    let parts = run_ensemble_with(sim, cfg, n_runs, digest)?;
    let names = sim.mode_names();
    let mut occ = vec![0.0; names.len()];
    let mut inter: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut waiting: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut per_run = Vec::with_capacity(parts.len());
    for p in parts {
        for (o, v) in occ.iter_mut().zip(&p.occupancy) {
            *o += v;
        }
        for (e, v) in p.inter {
            inter.entry(e).or_default().extend(v);
        }
        for (e, v) in p.waiting {
            waiting.entry(e).or_default().extend(v);
        }
        per_run.push(p.summary);
    }
    let total: f64 = occ.iter().sum();
    let events = waiting
        .into_iter()
        .map(|(e, w)| {
            let gaps = inter.remove(&e).unwrap_or_default();
            let (inter_mean, inter_variance) = mean_var(&gaps);
            let (waiting_mean, waiting_variance) = mean_var(&w);
            let stats = EventStats {
                count: w.len(),
                inter_count: gaps.len(),
                inter_mean,
                inter_variance,
                waiting_mean,
                waiting_variance,
                inter_samples: gaps,
                waiting_samples: w,
            };
            (e, stats)
        })
        .collect();
    Ok(EnsembleSummary {
        seed: cfg.seed,
        runs: n_runs,
        t_end: cfg.t_end,
        partial: per_run.iter().any(|r| !r.termination.is_horizon()),
        events,
        occupancy: occ
            .iter()
            .enumerate()
            .map(|(mode, &time)| ModeOccupancy {
                mode,
                name: names[mode].clone(),
                time,
                fraction: if total > 0.0 { time / total } else { 0.0 },
            })
            .collect(),
        per_run,
    })
}
