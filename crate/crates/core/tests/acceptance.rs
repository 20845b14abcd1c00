//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the report is always printed; exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::gen::{automaton, automaton_pair, sub_spec};
use common::laws::{product_laws, subcomponent_cardinality, unit_law};
use common::{exp_cdf, ks_p_value, ks_statistic, load, parse};
use hype_core::compiler::{compile, PruneMode};
use hype_core::simulator::{
    run_ensemble, run_ensemble_with, simulate, SimConfig, Simulator, Termination, Trace,
};
use hype_core::tdsha::Tdsha;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, u64, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn compiled(name: &str, prune: PruneMode) -> Tdsha {
    compile(&load(name), prune).unwrap().0
}

fn cfg(t_end: f64, seed: u64) -> SimConfig {
    SimConfig {
        t_end,
        seed,
        ..Default::default()
    }
}

fn downloader_pipeline() -> Outcome {
    let (t, report) =
        compile(&load("downloader.hype"), PruneMode::Final).map_err(|e| e.to_string())?;
    let stage = |name: &str| {
        report
            .stages
            .iter()
            .find(|s| s.stage == name)
            .map(|s| (s.modes_before, s.modes_after))
            .ok_or(format!("no stage `{name}`"))
    };
    let sub = stage("subcomponent Dwnldr")?;
    let ctrl = stage("controller Con_dw")?;
    let sys = stage("system Downloader")?;
    ensure(sub.0 == 2, format!("subcomponent has {} modes", sub.0))?;
    ensure(ctrl.0 == 2, format!("controller has {} modes", ctrl.0))?;
    ensure(sys == (4, 2), format!("system {} → {}", sys.0, sys.1))?;
    ensure(t.modes.len() == 2, "pruned automaton size")?;
    Ok(format!(
        "subcomponent 2, controller 2, product {} → {}",
        sys.0, sys.1
    ))
}

fn runner_config() -> Config {
    Config {
        failure_persistence: None,
        ..Config::with_cases(100)
    }
}

fn cardinality_law() -> Outcome {
    let mut runner = TestRunner::new(runner_config());
    runner
        .run(&sub_spec(), |s| subcomponent_cardinality(&s))
        .map_err(|e| e.to_string())?;
    Ok("100 random subcomponents".into())
}

fn product_law() -> Outcome {
    let mut runner = TestRunner::new(runner_config());
    runner
        .run(&automaton_pair(), |(a, b, sync)| {
            product_laws(&a, &b, &sync)
        })
        .map_err(|e| e.to_string())?;
    runner
        .run(&automaton("p"), |a| unit_law(&a))
        .map_err(|e| e.to_string())?;
    Ok("100 random pairs, 100 unit products".into())
}

fn ode_accuracy() -> Outcome {
    let (t, _) = compile(&parse(common::DECAY), PruneMode::Final).map_err(|e| e.to_string())?;
    let tr = simulate(&t, &cfg(10.0, 0)).map_err(|e| e.to_string())?;
    let sq: f64 = tr
        .samples
        .iter()
        .map(|s| (s.x[0] - (600.0 - 350.0 * (-s.t).exp())).powi(2))
        .sum();
    let rms = (sq / tr.samples.len() as f64).sqrt();
    ensure(rms <= 1e-6, format!("rms error {rms:.3e}"))?;
    Ok(format!(
        "rms error {rms:.3e} over {} samples",
        tr.samples.len()
    ))
}

fn urgent_timing() -> Outcome {
    let t = compiled("orbiter_extended.hype", PruneMode::Final);
    let tr = simulate(&t, &cfg(500.0, 0)).map_err(|e| e.to_string())?;
    ensure(tr.termination.is_horizon(), format!("{:?}", tr.termination))?;
    let ti = tr.var("T").unwrap();
    let mut worst: f64 = 0.0;
    for j in tr.jumps_of("light") {
        worst = worst.max((j.x_before[ti] - 12.0).abs());
    }
    let darks: Vec<_> = tr.jumps_of("dark").collect();
    for j in &darks {
        worst = worst.max((j.x_before[ti] - 24.0).abs());
        ensure(
            j.x_after[ti] == 0.0,
            format!("T = {} after dark", j.x_after[ti]),
        )?;
    }
    ensure(worst <= 1e-6, format!("guard miss {worst:.3e}"))?;
    let mut spacing: f64 = 0.0;
    for w in darks.windows(2) {
        spacing = spacing.max((w[1].t - w[0].t - 24.0).abs());
    }
    ensure(
        spacing <= 1e-6,
        format!("dark spacing off by {spacing:.3e}"),
    )?;
    ensure(darks.len() == 20, format!("{} dark jumps", darks.len()))?;
    Ok(format!(
        "{} darks, max guard miss {worst:.1e}, max spacing error {spacing:.1e}",
        darks.len()
    ))
}

fn constant_rate() -> Outcome {
    let sim = Simulator::new(&compiled("downloader.hype", PruneMode::Final))
        .map_err(|e| e.to_string())?;
    let summary = run_ensemble(&sim, &cfg(20_000.0, 2024), 64).map_err(|e| e.to_string())?;
    let waits = &summary.events["request"].waiting_samples;
    ensure(
        waits.len() >= 10_000,
        format!("only {} samples", waits.len()),
    )?;
    let mean = summary.events["request"].waiting_mean;
    ensure((mean - 25.0).abs() <= 0.02 * 25.0, format!("mean {mean}"))?;
    let d = ks_statistic(waits, exp_cdf(0.04));
    let p = ks_p_value(d, waits.len());
    ensure(p > 0.01, format!("KS p = {p:.4}"))?;
    Ok(format!(
        "n = {}, mean {mean:.3}, KS D = {d:.4}, p = {p:.3}",
        waits.len()
    ))
}

/// `∫ rate` between each `request` and the `completed` that ends it, by the
/// trapezoid rule on the recorded samples.
fn completed_hazards(tr: &Trace, rate: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut acc = None;
    for w in tr.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.event.as_deref() == Some("request") {
            acc = Some(0.0);
            continue;
        }
        if let Some(l) = acc.as_mut() {
            *l += 0.5 * (b.t - a.t) * (rate(&a.x) + rate(&b.x));
        }
        if b.event.as_deref() == Some("completed") {
            out.extend(acc.take());
        }
    }
    out
}

fn state_dependent_rate() -> Outcome {
    let t = compiled("orbiter_extended.hype", PruneMode::Final);
    let d = t.var_index("D").unwrap();
    let sim = Simulator::new(&t).map_err(|e| e.to_string())?;
    let z = run_ensemble_with(&sim, &cfg(8_000.0, 77), 96, |tr| {
        completed_hazards(&tr, |x| 0.5 / (10.0 + x[d]))
    })
    .map_err(|e| e.to_string())?
    .concat();
    ensure(z.len() >= 5_000, format!("only {} samples", z.len()))?;
    let stat = ks_statistic(&z, exp_cdf(1.0));
    let p = ks_p_value(stat, z.len());
    ensure(p > 0.01, format!("KS p = {p:.4}"))?;
    Ok(format!("n = {}, KS D = {stat:.4}, p = {p:.3}", z.len()))
}

fn sawtooth_shape() -> Outcome {
    let t = compiled("downloader.hype", PruneMode::Final);
    let mut segments = 0;
    for seed in 0..5 {
        let tr = simulate(&t, &cfg(1000.0, seed)).map_err(|e| e.to_string())?;
        let mut downloading = false;
        for w in tr.samples.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if let Some(e) = &b.event {
                downloading = e == "request";
                if e == "completed" {
                    ensure(
                        b.x[0] == 0.0,
                        format!("D = {} after completed at {}", b.x[0], b.t),
                    )?;
                }
                segments += 1;
                continue;
            }
            if b.t == a.t {
                continue;
            }
            let slope = (b.x[0] - a.x[0]) / (b.t - a.t);
            if downloading {
                ensure(
                    slope.abs() <= 1e-12,
                    format!("download slope {slope:e} at {}", a.t),
                )?;
            } else {
                ensure(
                    (slope - 1.0).abs() <= 1e-6,
                    format!("accumulation slope {slope} at {}", a.t),
                )?;
            }
        }
    }
    Ok(format!("5 traces, {segments} segments"))
}

/// Download durations split by how much of the download K spent below 275.
fn temperature_effect() -> Outcome {
    let t = compiled("orbiter_tempdep.hype", PruneMode::Final);
    let k = t.var_index("K").unwrap();
    let sim = Simulator::new(&t).map_err(|e| e.to_string())?;
    let per_run = run_ensemble_with(&sim, &cfg(5_000.0, 4242), 16, |tr| {
        let mut cold = Vec::new();
        let mut nominal = Vec::new();
        let mut start: Option<(f64, f64, bool)> = None; // (t0, time below 275, stayed inside)
        for w in tr.samples.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if b.event.as_deref() == Some("request") {
                start = Some((b.t, 0.0, (275.0..=325.0).contains(&b.x[k])));
                continue;
            }
            if let Some((_, below, inside)) = start.as_mut() {
                let dt = b.t - a.t;
                let (ka, kb) = (a.x[k], b.x[k]);
                // time-weighted share of the interval with K < 275
                let frac = if ka < 275.0 && kb < 275.0 {
                    1.0
                } else if ka >= 275.0 && kb >= 275.0 {
                    0.0
                } else {
                    let lo = ka.min(kb);
                    (275.0 - lo) / (ka - kb).abs()
                };
                *below += dt * frac;
                *inside &= (275.0..=325.0).contains(&kb);
            }
            if b.event.as_deref() == Some("completed") {
                if let Some((t0, below, inside)) = start.take() {
                    let dur = b.t - t0;
                    if below > 0.5 * dur {
                        cold.push(dur);
                    } else if inside {
                        nominal.push(dur);
                    }
                }
            }
        }
        (cold, nominal)
    })
    .map_err(|e| e.to_string())?;
    let (cold, nominal): (Vec<Vec<f64>>, Vec<Vec<f64>>) = per_run.into_iter().unzip();
    let (cold, nominal) = (cold.concat(), nominal.concat());
    ensure(
        cold.len() >= 30 && nominal.len() >= 30,
        format!("{} cold, {} nominal", cold.len(), nominal.len()),
    )?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mc, mn) = (mean(&cold), mean(&nominal));
    ensure(mc > mn, format!("cold mean {mc:.2} ≤ nominal mean {mn:.2}"))?;
    Ok(format!(
        "cold downloads {mc:.2} (n = {}) vs nominal {mn:.2} (n = {})",
        cold.len(),
        nominal.len()
    ))
}

/// Trace with mode ids replaced by mode names.
fn by_name(tr: &Trace) -> String {
    let mut out = String::new();
    for s in &tr.samples {
        let x: Vec<u64> = s.x.iter().map(|v| v.to_bits()).collect();
        out.push_str(&format!(
            "{:?} {} {:?} {:?}\n",
            s.t.to_bits(),
            tr.modes[s.mode],
            x,
            s.event
        ));
    }
    for j in &tr.jumps {
        out.push_str(&format!(
            "{} {} {} -> {} {:?}\n",
            j.t.to_bits(),
            j.event,
            tr.modes[j.src],
            tr.modes[j.dst],
            j.x_after.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        ));
    }
    out.push_str(&format!("{:?}", tr.termination));
    out
}

fn pruning_transparency() -> Outcome {
    let mut compared = 0;
    for name in [
        "downloader.hype",
        "orbiter.hype",
        "orbiter_extended.hype",
        "orbiter_tempdep.hype",
    ] {
        let pruned =
            Simulator::new(&compiled(name, PruneMode::Final)).map_err(|e| e.to_string())?;
        let full = Simulator::new(&compiled(name, PruneMode::Off)).map_err(|e| e.to_string())?;
        for seed in 0..10 {
            let c = cfg(300.0, seed);
            let a = pruned.run(&c, 0).map_err(|e| e.to_string())?;
            let b = full.run(&c, 0).map_err(|e| e.to_string())?;
            ensure(
                by_name(&a) == by_name(&b),
                format!("{name}, seed {seed}: traces differ"),
            )?;
            compared += 1;
        }
    }
    Ok(format!("{compared} trace pairs identical"))
}

fn determinism() -> Outcome {
    for name in ["downloader.hype", "orbiter_tempdep.hype"] {
        let t = compiled(name, PruneMode::Final);
        let a = simulate(&t, &cfg(500.0, 31337)).map_err(|e| e.to_string())?;
        let b = simulate(&t, &cfg(500.0, 31337)).map_err(|e| e.to_string())?;
        ensure(
            a.canonical() == b.canonical(),
            format!("{name}: canonical output differs"),
        )?;
    }
    let sim = Simulator::new(&compiled("downloader.hype", PruneMode::Final))
        .map_err(|e| e.to_string())?;
    let a = run_ensemble(&sim, &cfg(1000.0, 5), 8).map_err(|e| e.to_string())?;
    let b = run_ensemble(&sim, &cfg(1000.0, 5), 8).map_err(|e| e.to_string())?;
    ensure(a.to_json() == b.to_json(), "ensemble summaries differ")?;
    Ok("traces and ensemble summaries byte-identical".into())
}

fn zeno_guard() -> Outcome {
    let (t, _) = compile(&parse(common::ZENO), PruneMode::Final).map_err(|e| e.to_string())?;
    let tr = simulate(&t, &cfg(10.0, 0)).map_err(|e| e.to_string())?;
    match tr.termination {
        Termination::ChainLimitExceeded { t, jumps } => {
            Ok(format!("stopped at t = {t} after {jumps} jumps"))
        }
        other => Err(format!("terminated with {other:?}")),
    }
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("downloader pipeline", 1, downloader_pipeline),
        ("subcomponent cardinality law", 5, cardinality_law),
        ("product laws", 5, product_law),
        ("ODE accuracy", 1, ode_accuracy),
        ("urgent-event timing", 10, urgent_timing),
        ("constant-rate statistics", 30, constant_rate),
        ("state-dependent-rate statistics", 60, state_dependent_rate),
        ("downloader trajectory shape", 5, sawtooth_shape),
        ("temperature-dependent downloads", 60, temperature_effect),
        ("pruning transparency", 30, pruning_transparency),
        ("determinism", 5, determinism),
        ("well-behavedness guard", 1, zeno_guard),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut failed = 0;
    let mut results = BTreeMap::new();
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > Duration::from_secs(*budget) => Err(format!(
                "{msg}; took {:.2}s, budget {budget}s",
                elapsed.as_secs_f64()
            )),
            o => o,
        };
        match &outcome {
            Ok(msg) => println!(
                "criterion {n:>2} PASS  {name}: {msg} [{:.2}s]",
                elapsed.as_secs_f64()
            ),
            Err(msg) => {
                failed += 1;
                println!(
                    "criterion {n:>2} FAIL  {name}: {msg} [{:.2}s]",
                    elapsed.as_secs_f64()
                );
            }
        }
        results.insert(n, outcome.is_ok());
    }
    println!(
        "{} of {} criteria passed",
        results.values().filter(|ok| **ok).count(),
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
