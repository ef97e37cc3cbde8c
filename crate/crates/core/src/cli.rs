//! `intent-mpc` command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad arguments or scenario,
//! 3 controller failure (outputs up to the failure are still written).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::dubins::{control_schedule, shortest_path};
use crate::io::plots;
use crate::io::{fmt_g9, load_scenario, parse_trace_csv, write_trace_csv, ScenarioError};
use crate::mpc::MpcMode;
use crate::nlp::SolverStatus;
use crate::pose::Pose;
use crate::sim::{
    metrics, run_closed_loop, run_monte_carlo, Disturbance, MonteCarloReport, ScenarioSpec,
    SimError, SimTrace, TraceSummary,
};

#[derive(Debug, Parser)]
#[command(
    name = "intent-mpc",
    version,
    about = "Intent-aware MPC collision avoidance for two aircraft"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one closed-loop encounter and write its trace, summary and plots.
    Simulate(SimulateArgs),
    /// Run seeded disturbed encounters plus a disturbance-free reference.
    Montecarlo(MonteCarloArgs),
    /// Print the shortest Dubins path between two poses and its turn-rate schedule.
    Dubins(DubinsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    ScenarioTree,
    Classic,
    NoIntent,
    Unconstrained,
}

impl From<ModeArg> for MpcMode {
    fn from(m: ModeArg) -> MpcMode {
        match m {
            ModeArg::ScenarioTree => MpcMode::ScenarioTree,
            ModeArg::Classic => MpcMode::Classic,
            ModeArg::NoIntent => MpcMode::NoIntent,
            ModeArg::Unconstrained => MpcMode::Unconstrained,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Store wall-clock solve times in the trace (makes output non-reproducible).
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DubinsArgs {
    /// Start pose as `x,y,heading` (meters, radians).
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub start: Pose,
    /// Goal pose as `x,y,heading`.
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub goal: Pose,
    #[arg(long, default_value_t = 10.0 / 0.07, allow_hyphen_values = true)]
    pub radius: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub speed: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub dt: f64,
}

fn parse_pose(s: &str) -> Result<Pose, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,heading, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok(Pose::new(v[0], v[1], v[2]))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Scenario(ScenarioError::Io { .. }) => 1,
            CliError::Scenario(_) | CliError::Invalid(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

fn load(path: &Path, mode: Option<ModeArg>, seed: Option<u64>) -> Result<ScenarioSpec, CliError> {
    let mut spec = load_scenario(path)?;
    if let Some(m) = mode {
        spec.mpc.mode = m.into();
    }
    if let Some(s) = seed {
        spec.rng_seed = s;
    }
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverStats {
    pub solves: usize,
    pub converged: usize,
    pub max_iters: usize,
    pub infeasible_stationary: usize,
    pub max_inner_iterations: Option<usize>,
    pub mean_inner_iterations: Option<f64>,
}

impl SolverStats {
    pub fn of(trace: &SimTrace) -> Self {
        let statuses: Vec<SolverStatus> = trace
            .records
            .iter()
            .filter_map(|r| r.solver_status)
            .collect();
        let count = |s: SolverStatus| statuses.iter().filter(|&&x| x == s).count();
        let iters: Vec<usize> = trace
            .records
            .iter()
            .filter_map(|r| r.solver_iterations)
            .collect();
        Self {
            solves: statuses.len(),
            converged: count(SolverStatus::Converged),
            max_iters: count(SolverStatus::MaxIters),
            infeasible_stationary: count(SolverStatus::InfeasibleStationary),
            max_inner_iterations: iters.iter().copied().max(),
            mean_inner_iterations: (!iters.is_empty())
                .then(|| iters.iter().sum::<usize>() as f64 / iters.len() as f64),
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub mode: MpcMode,
    pub seed: u64,
    pub rho: f64,
    pub target_radius: f64,
    /// Recomputed from `trace.csv`.
    pub metrics: TraceSummary,
    pub solver: SolverStats,
    pub error: Option<String>,
}

fn write_run_outputs(
    dir: &Path,
    spec: &ScenarioSpec,
    trace: &SimTrace,
    error: Option<String>,
) -> Result<TraceSummary, CliError> {
    let csv = write_trace_csv(trace, error.is_some());
    write_file(dir, "trace.csv", &csv)?;
    let reparsed =
        parse_trace_csv(&csv, trace.dt, trace.rho).map_err(|e| CliError::Invalid(e.to_string()))?;
    let summary = SimulationSummary {
        mode: spec.mpc.mode,
        seed: spec.rng_seed,
        rho: spec.rho(),
        target_radius: spec.target_radius,
        metrics: metrics(&reparsed),
        solver: SolverStats::of(trace),
        error,
    };
    write_file(dir, "summary.json", &json(&summary))?;
    write_file(
        dir,
        "traj.svg",
        &plots::trajectory_svg(trace, spec.own_target(), spec.target_radius),
    )?;
    write_file(dir, "distance.svg", &plots::distance_svg(trace))?;
    write_file(
        dir,
        "controls.svg",
        &plots::controls_svg(trace, &spec.mpc.own_bounds),
    )?;
    Ok(summary.metrics)
}

fn describe(m: &TraceSummary) -> String {
    let arrival = match m.arrival_time {
        Some(t) => format!("arrived at t = {} s", fmt_g9(t)),
        None => "did not arrive".into(),
    };
    format!(
        "min separation {} m at t = {} s, {} violations, path {} m, {}",
        fmt_g9(m.min_separation),
        fmt_g9(m.min_separation_time),
        m.violation_count,
        fmt_g9(m.path_length),
        arrival
    )
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut spec = load(&args.scenario, args.mode, args.seed)?;
    spec.record_timing = args.record_timing;
    create_dir(&args.out)?;
    let (trace, error) = match run_closed_loop(&spec) {
        Ok(t) => (t, None),
        Err(SimError::Controller {
            step,
            source,
            partial,
        }) => (
            *partial,
            Some(format!("controller failed at step {step}: {source}")),
        ),
        Err(e) => return Err(CliError::Invalid(e.to_string())),
    };
    let m = write_run_outputs(&args.out, &spec, &trace, error.clone())?;
    let _ = writeln!(out, "{}: {}", spec.mpc.mode.as_str(), describe(&m));
    match error {
        Some(e) => Err(CliError::Solver(e)),
        None => Ok(()),
    }
}

/// Contents of `report.json`.
#[derive(Debug, Serialize)]
pub struct MonteCarloFile<'a> {
    pub mode: MpcMode,
    pub seed: u64,
    pub rho: f64,
    pub disturbance: Disturbance,
    #[serde(flatten)]
    pub report: &'a MonteCarloReport,
}

pub fn cmd_montecarlo(args: &MonteCarloArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(CliError::Invalid("--runs must be at least 1".into()));
    }
    let spec = load(&args.scenario, args.mode, args.seed)?;
    create_dir(&args.out)?;
    let runs_dir = args.out.join("runs");
    create_dir(&runs_dir)?;
    let report = run_monte_carlo(&spec, args.runs).map_err(|e| CliError::Invalid(e.to_string()))?;

    if let Some(t) = &report.nominal.trace {
        write_file(
            &args.out,
            "nominal.csv",
            &write_trace_csv(t, report.nominal.error.is_some()),
        )?;
    }
    for r in &report.runs {
        if let (Some(i), Some(t)) = (r.run, &r.trace) {
            write_file(
                &runs_dir,
                &format!("run_{i:03}.csv"),
                &write_trace_csv(t, r.error.is_some()),
            )?;
        }
    }
    write_file(
        &args.out,
        "report.json",
        &json(&MonteCarloFile {
            mode: spec.mpc.mode,
            seed: spec.rng_seed,
            rho: spec.rho(),
            disturbance: spec.disturbance,
            report: &report,
        }),
    )?;
    let traces: Vec<&SimTrace> = report
        .runs
        .iter()
        .filter_map(|r| r.trace.as_ref())
        .collect();
    let nominal = report.nominal.trace.as_ref();
    write_file(
        &args.out,
        "overlay_traj.svg",
        &plots::overlay_trajectory_svg(&traces, nominal, spec.own_target(), spec.target_radius),
    )?;
    write_file(
        &args.out,
        "overlay_distance.svg",
        &plots::overlay_distance_svg(&traces, nominal, spec.rho()),
    )?;

    let a = &report.aggregate;
    let _ = writeln!(
        out,
        "{} runs ({} failed): min separation {} m, {} runs with violations, intruder spread {} m at step {}",
        a.runs,
        a.failed_runs,
        fmt_g9(a.min_min_separation),
        a.runs_with_violation,
        fmt_g9(a.intruder_terminal_spread),
        a.spread_step
    );
    let failed: Vec<String> = report
        .runs
        .iter()
        .chain(std::iter::once(&report.nominal))
        .filter_map(|r| r.error.as_ref().map(|e| format!("run {:?}: {e}", r.run)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Solver(failed.join("; ")))
    }
}

pub fn cmd_dubins(args: &DubinsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let path = shortest_path(args.start, args.goal, args.radius)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let sched = control_schedule(&path, args.speed, args.dt)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let [a, b, c] = path.seg_lengths();
    let mut s = String::new();
    s.push_str(&format!("word,{}\n", path.word()));
    s.push_str(&format!(
        "seg_lengths,{},{},{}\n",
        fmt_g9(a),
        fmt_g9(b),
        fmt_g9(c)
    ));
    s.push_str(&format!("total_length,{}\n", fmt_g9(path.total_length())));
    s.push_str("step,angular_rate\n");
    for (k, u) in sched.angular_rates.iter().enumerate() {
        s.push_str(&format!("{k},{}\n", fmt_g9(*u)));
    }
    out.write_all(s.as_bytes()).map_err(|source| CliError::Io {
        path: "<stdout>".into(),
        source,
    })
}

/// Parses `args` and runs the chosen command; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                let _ = err.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Montecarlo(a) => cmd_montecarlo(a, out),
        Command::Dubins(a) => cmd_dubins(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
