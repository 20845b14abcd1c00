//! `hype`: check, compile, simulate and run ensembles of stochastic HYPE models.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hype_core::compiler::{compile, CompileReport, PruneMode};
use hype_core::model::{validate, HypeModel};
use hype_core::parser::parse_syntax_in;
use hype_core::simulator::{run_ensemble, SimConfig, SimError, Simulator};
use hype_core::tdsha::{to_dot, to_json, Tdsha};

/// Exit statuses.
const OK: u8 = 0;
const INVALID: u8 = 1;
const SIM_FAILURE: u8 = 2;
const USAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hype",
    version,
    about = "Stochastic HYPE models: check, compile, simulate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model and summarize its contents.
    Check { model: PathBuf },
    /// Compile a model to a transition-driven stochastic hybrid automaton.
    Compile {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "final")]
        prune: Prune,
        /// Artifacts to write; may be repeated.
        #[arg(long, value_enum, default_values = ["automaton"])]
        emit: Vec<Emit>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate one trajectory and write its trace.
    Simulate {
        model: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate independent runs and write a statistical summary.
    Ensemble {
        model: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Override a declared constant, as `name=value`; may be repeated.
    #[arg(long = "set", value_name = "NAME=VALUE", value_parser = parse_override)]
    set: Vec<(String, f64)>,
    /// Output directory.
    #[arg(long, env = "HYPE_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100.0)]
    t_end: f64,
    #[arg(long, default_value_t = 1e-8)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-10)]
    atol: f64,
    /// Largest integration step; `inf` for none.
    #[arg(long, default_value_t = 1.0)]
    max_step: f64,
    #[arg(long, default_value_t = 1e-9)]
    guard_tol: f64,
    #[arg(long, default_value_t = 1000)]
    chain_limit: usize,
    /// Record every n-th accepted step.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, value_enum, default_value = "final")]
    prune: Prune,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            t_end: self.t_end,
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step,
            guard_tol: self.guard_tol,
            chain_limit: self.chain_limit,
            stride: self.stride,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Prune {
    Off,
    Final,
    EachStage,
}

impl From<Prune> for PruneMode {
    fn from(p: Prune) -> Self {
        match p {
            Prune::Off => PruneMode::Off,
            Prune::Final => PruneMode::Final,
            Prune::EachStage => PruneMode::EachStage,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    /// JSON automaton document.
    Automaton,
    /// Graphviz DOT graph.
    Graph,
    /// JSON compilation report.
    Report,
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("`{value}`: {e}"))?;
    Ok((name.trim().to_owned(), value))
}

/// A failure carrying its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn load(path: &Path, overrides: &[(String, f64)]) -> Result<HypeModel, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(INVALID, format!("{}: {e}", path.display())))?;
    let file = path.display().to_string();
    let mut model = parse_syntax_in(&text, Some(&file)).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("error: {e}")).collect();
        Failure::new(INVALID, lines.join("\n"))
    })?;
    for (name, value) in overrides {
        model
            .set_constant(name, *value)
            .map_err(|e| Failure::new(USAGE, format!("--set {name}: {e}")))?;
    }
    let violations = validate(&model);
    if !violations.is_empty() {
        let lines: Vec<String> = violations
            .iter()
            .map(|v| format!("error: {file}:{v}"))
            .collect();
        return Err(Failure::new(INVALID, lines.join("\n")));
    }
    Ok(model)
}

fn build(model: &HypeModel, prune: Prune) -> Result<(Tdsha, CompileReport), Failure> {
    compile(model, prune.into()).map_err(|e| Failure::new(INVALID, format!("error: {e}")))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn write(dir: &Path, name: String, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::new(USAGE, format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Failure::new(USAGE, format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn join<'a>(items: impl IntoIterator<Item = &'a String>) -> String {
    let v: Vec<&str> = items.into_iter().map(String::as_str).collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(", ")
    }
}

fn check(path: &Path) -> Outcome {
    let m = load(path, &[])?;
    let (inst, stoch) = m.events_by_kind();
    let mut out = String::new();
    let _ = writeln!(out, "model {}: ok", m.name);
    let subs: Vec<String> = m.subcomponents.iter().map(|s| s.name.clone()).collect();
    let _ = writeln!(out, "subcomponents ({}): {}", subs.len(), join(&subs));
    let _ = writeln!(
        out,
        "instantaneous events ({}): {}",
        inst.len(),
        join(&inst)
    );
    let _ = writeln!(out, "stochastic events ({}): {}", stoch.len(), join(&stoch));
    let vars = m.variable_names();
    let _ = writeln!(out, "variables ({}): {}", vars.len(), join(&vars));
    let types: Vec<String> = m.types.iter().map(|t| t.name.clone()).collect();
    let _ = writeln!(out, "influence types ({}): {}", types.len(), join(&types));
    print!("{out}");
    Ok(OK)
}

fn cmd_compile(path: &Path, prune: Prune, emit: &[Emit], common: &Common) -> Outcome {
    let m = load(path, &common.set)?;
    let (t, report) = build(&m, prune)?;
    let last = report.final_stage();
    match prune {
        Prune::Off => println!("modes: {}", t.modes.len()),
        _ => println!("modes: {} → {} (pruned)", last.modes_before, t.modes.len()),
    }
    println!(
        "transitions: {} continuous, {} instantaneous, {} stochastic",
        t.flows.len(),
        t.instantaneous.len(),
        t.stochastic.len()
    );
    let name = stem(path);
    for e in emit {
        match e {
            Emit::Automaton => write(&common.out_dir, format!("{name}.tdsha.json"), &to_json(&t))?,
            Emit::Graph => write(&common.out_dir, format!("{name}.dot"), &to_dot(&t))?,
            Emit::Report => {
                let json = serde_json::to_string_pretty(&report).expect("report serializes");
                write(&common.out_dir, format!("{name}.report.json"), &json)?
            }
        };
    }
    Ok(OK)
}

fn sim_error(e: SimError) -> Failure {
    match e {
        SimError::Config(_) => Failure::new(USAGE, format!("error: {e}")),
        _ => Failure::new(SIM_FAILURE, format!("error: {e}")),
    }
}

fn prepare(path: &Path, sim: &SimArgs, common: &Common) -> Result<(Simulator, SimConfig), Failure> {
    let cfg = sim.config();
    cfg.validate().map_err(sim_error)?;
    let m = load(path, &common.set)?;
    let (t, _) = build(&m, sim.prune)?;
    let s = Simulator::new(&t).map_err(sim_error)?;
    Ok((s, cfg))
}

fn cmd_simulate(path: &Path, sim: &SimArgs, common: &Common) -> Outcome {
    let (s, cfg) = prepare(path, sim, common)?;
    let trace = s.run(&cfg, 0).map_err(sim_error)?;
    let name = stem(path);
    write(
        &common.out_dir,
        format!("{name}.trace.csv"),
        &trace.to_csv(),
    )?;
    write(
        &common.out_dir,
        format!("{name}.events.csv"),
        &trace.events_csv(),
    )?;
    write(
        &common.out_dir,
        format!("{name}.meta.json"),
        &trace.meta_json(),
    )?;
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    for j in &trace.jumps {
        *counts.entry(j.event.as_str()).or_default() += 1;
    }
    let counts: Vec<String> = counts.iter().map(|(e, n)| format!("{e} {n}")).collect();
    println!(
        "termination: {} at t = {}",
        trace.termination.name(),
        trace.end_time()
    );
    println!("jumps: {} ({})", trace.jumps.len(), join(&counts));
    Ok(if trace.termination.is_horizon() {
        OK
    } else {
        SIM_FAILURE
    })
}

fn cmd_ensemble(path: &Path, runs: usize, sim: &SimArgs, common: &Common) -> Outcome {
    if runs == 0 {
        return Err(Failure::new(USAGE, "error: --runs must be at least 1"));
    }
    let (s, cfg) = prepare(path, sim, common)?;
    let summary = run_ensemble(&s, &cfg, runs).map_err(sim_error)?;
    write(
        &common.out_dir,
        format!("{}.ensemble.json", stem(path)),
        &summary.to_json(),
    )?;
    let failed = summary
        .per_run
        .iter()
        .filter(|r| !r.termination.is_horizon())
        .count();
    println!("runs: {runs}, failed: {failed}");
    for (e, st) in &summary.events {
        println!(
            "{e}: {} firings, mean inter-firing {:.6}, mean waiting {:.6}",
            st.count, st.inter_mean, st.waiting_mean
        );
    }
    Ok(if summary.partial { SIM_FAILURE } else { OK })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { OK });
        }
    };
    let outcome = match &cli.command {
        Command::Check { model } => check(model),
        Command::Compile {
            model,
            prune,
            emit,
            common,
        } => cmd_compile(model, *prune, emit, common),
        Command::Simulate { model, sim, common } => cmd_simulate(model, sim, common),
        Command::Ensemble {
            model,
            runs,
            sim,
            common,
        } => cmd_ensemble(model, *runs, sim, common),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
