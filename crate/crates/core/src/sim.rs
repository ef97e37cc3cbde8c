//! Closed-loop encounters and Monte-Carlo batches.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dubins::{control_schedule, shortest_path, ControlSchedule, DubinsError};
use crate::dynamics::{nominal_rate, step, ControlInput};
use crate::mpc::{solve_step, MpcConfig, MpcError, MpcSolution};
use crate::nlp::SolverStatus;
use crate::pose::Pose;

/// Environment variable capping Monte-Carlo worker threads (0 or unset = all cores).
pub const THREADS_ENV: &str = "INTENT_MPC_THREADS";

/// Angular-rate noise added to the intruder's intent rate at every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Disturbance {
    None,
    /// Uniform on `[lo, hi]` rad/s.
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl Disturbance {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Disturbance::None => 0.0,
            Disturbance::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
        }
    }
}

/// Everything needed to run one encounter.
///
/// The controller settings, both action sets, the separation radius and the
/// ownship target live in `mpc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub own_start: Pose,
    pub intruder_start: Pose,
    /// Destination the intruder shares; its intent is the shortest Dubins path there.
    pub intruder_target: Pose,
    /// Arrival radius around the ownship target, meters.
    pub target_radius: f64,
    pub mpc: MpcConfig,
    pub disturbance: Disturbance,
    pub max_steps: usize,
    pub rng_seed: u64,
    /// Store wall-clock solve times in the trace.
    #[serde(default)]
    pub record_timing: bool,
}

impl ScenarioSpec {
    pub fn own_target(&self) -> Pose {
        self.mpc.target
    }

    pub fn rho(&self) -> f64 {
        self.mpc.rho
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        for (name, p) in [
            ("own_start", self.own_start),
            ("intruder_start", self.intruder_start),
            ("intruder_target", self.intruder_target),
        ] {
            if !p.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if !(self.target_radius > 0.0 && self.target_radius.is_finite()) {
            return bad(format!(
                "target_radius must be positive, got {}",
                self.target_radius
            ));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1".into());
        }
        if let Disturbance::Uniform { lo, hi } = self.disturbance {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!(
                    "disturbance bounds must satisfy lo <= hi, got [{lo}, {hi}]"
                ));
            }
        }
        self.mpc
            .validate()
            .map_err(|e| SimError::InvalidSpec(e.to_string()))
    }

    /// Intruder intent: heading rates along its shortest Dubins path at top speed.
    pub fn intruder_schedule(&self) -> Result<ControlSchedule, SimError> {
        let b = &self.mpc.intruder_bounds;
        let path = shortest_path(
            self.intruder_start,
            self.intruder_target,
            b.min_turn_radius(),
        )?;
        Ok(control_schedule(&path, b.v_max, self.mpc.dt)?)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("intruder intent: {0}")]
    Intent(#[from] DubinsError),
    #[error("controller failed at step {step}: {source}")]
    Controller {
        step: usize,
        #[source]
        source: MpcError,
        /// Trace up to (not including) the failed step.
        partial: Box<SimTrace>,
    },
}

/// One recorded stage. The last record of a trace carries the final poses and no input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub own: Pose,
    pub intruder: Pose,
    pub input: Option<ControlInput>,
    pub separation: f64,
    pub solver_status: Option<SolverStatus>,
    /// Inner solver iterations; not persisted in CSV traces.
    #[serde(skip)]
    pub solver_iterations: Option<usize>,
    pub solve_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Arrived,
    MaxSteps,
    /// Some stage came closer than the separation radius.
    ViolationFlagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub dt: f64,
    pub rho: f64,
    pub records: Vec<StepRecord>,
    pub arrived: bool,
    pub terminal: TerminalStatus,
}

impl SimTrace {
    fn new(dt: f64, rho: f64) -> Self {
        Self {
            dt,
            rho,
            records: Vec::new(),
            arrived: false,
            terminal: TerminalStatus::MaxSteps,
        }
    }

    /// Rebuilds a trace from stored records, deriving the terminal status.
    pub fn from_records(dt: f64, rho: f64, records: Vec<StepRecord>, arrived: bool) -> Self {
        let mut trace = Self::new(dt, rho);
        trace.records = records;
        trace.finish(arrived);
        trace
    }

    fn finish(&mut self, arrived: bool) {
        self.arrived = arrived;
        self.terminal = if self.records.iter().any(|r| r.separation < self.rho) {
            TerminalStatus::ViolationFlagged
        } else if arrived {
            TerminalStatus::Arrived
        } else {
            TerminalStatus::MaxSteps
        };
    }

    pub fn applied_inputs(&self) -> Vec<ControlInput> {
        self.records.iter().filter_map(|r| r.input).collect()
    }

    pub fn own_poses(&self) -> Vec<Pose> {
        self.records.iter().map(|r| r.own).collect()
    }

    pub fn intruder_poses(&self) -> Vec<Pose> {
        self.records.iter().map(|r| r.intruder).collect()
    }

    pub fn summary(&self) -> TraceSummary {
        metrics(self)
    }
}

/// Scalar metrics of one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps: usize,
    pub min_separation: f64,
    /// Time of the first stage attaining `min_separation`, seconds.
    pub min_separation_time: f64,
    /// Closest approach between stages, assuming straight flight within each step.
    pub min_intersample_separation: f64,
    pub path_length: f64,
    pub arrival_time: Option<f64>,
    pub violation_count: usize,
    pub terminal: TerminalStatus,
}

/// Distance from the origin to the segment `a + s (b - a)`, `s` in `[0, 1]`.
fn segment_origin_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let d = (b.0 - a.0, b.1 - a.1);
    let dd = d.0 * d.0 + d.1 * d.1;
    let s = if dd > 0.0 {
        (-(a.0 * d.0 + a.1 * d.1) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a.0 + s * d.0).hypot(a.1 + s * d.1)
}

/// Computes summary metrics; `trace` must contain at least one record.
pub fn metrics(trace: &SimTrace) -> TraceSummary {
    let recs = &trace.records;
    assert!(!recs.is_empty(), "metrics of an empty trace");
    let (mut min_sep, mut min_t) = (f64::INFINITY, 0.0);
    for r in recs {
        if r.separation < min_sep {
            min_sep = r.separation;
            min_t = r.t as f64 * trace.dt;
        }
    }
    let rel = |r: &StepRecord| (r.own.x - r.intruder.x, r.own.y - r.intruder.y);
    let min_inter = recs
        .windows(2)
        .map(|w| segment_origin_distance(rel(&w[0]), rel(&w[1])))
        .fold(min_sep, f64::min);
    let last = recs.last().unwrap();
    TraceSummary {
        steps: recs.len() - 1,
        min_separation: min_sep,
        min_separation_time: min_t,
        min_intersample_separation: min_inter,
        path_length: recs
            .iter()
            .filter_map(|r| r.input)
            .map(|i| trace.dt * i.v)
            .sum(),
        arrival_time: trace.arrived.then_some(last.t as f64 * trace.dt),
        violation_count: recs.iter().filter(|r| r.separation < trace.rho).count(),
        terminal: trace.terminal,
    }
}

/// Runs one encounter until the ownship enters the target disc or `max_steps` elapse.
///
/// The intruder's intent schedule is computed once from its start pose and
/// indexed by absolute step, so disturbances push it off the planned path
/// without replanning.
pub fn run_closed_loop(spec: &ScenarioSpec) -> Result<SimTrace, SimError> {
    spec.validate()?;
    let schedule = spec.intruder_schedule()?;
    let cfg = &spec.mpc;
    let ib = cfg.intruder_bounds;
    let target = spec.own_target();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut trace = SimTrace::new(cfg.dt, cfg.rho);
    let (mut own, mut intr) = (spec.own_start, spec.intruder_start);
    let mut warm: Option<MpcSolution> = None;

    let arrived_at = |p: &Pose| p.distance_to(&target) <= spec.target_radius;
    let final_record = |t: usize, own: Pose, intr: Pose| StepRecord {
        t,
        own,
        intruder: intr,
        input: None,
        separation: own.distance_to(&intr),
        solver_status: None,
        solver_iterations: None,
        solve_ms: 0.0,
    };

    for t in 0..spec.max_steps {
        if arrived_at(&own) {
            trace.records.push(final_record(t, own, intr));
            trace.finish(true);
            return Ok(trace);
        }
        let clock = Instant::now();
        let sol = match solve_step(own, intr, t, &schedule, cfg, warm.as_ref()) {
            Ok(s) => s,
            Err(source) => {
                trace.records.push(final_record(t, own, intr));
                trace.finish(false);
                return Err(SimError::Controller {
                    step: t,
                    source,
                    partial: Box::new(trace),
                });
            }
        };
        let solve_ms = if spec.record_timing {
            clock.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let input = sol.first_input;
        let omega = spec.disturbance.draw(&mut rng);
        let u2 = (nominal_rate(&schedule, t, &ib) + omega).clamp(ib.u_min, ib.u_max);
        trace.records.push(StepRecord {
            t,
            own,
            intruder: intr,
            input: Some(input),
            separation: own.distance_to(&intr),
            solver_status: Some(sol.solver.status),
            solver_iterations: Some(sol.solver.inner_iters_total),
            solve_ms,
        });
        own = step(own, input, cfg.dt);
        intr = step(intr, ControlInput::new(ib.v_max, u2), cfg.dt);
        warm = Some(sol);
    }
    trace.records.push(final_record(spec.max_steps, own, intr));
    let arrived = arrived_at(&own);
    trace.finish(arrived);
    Ok(trace)
}

/// Outcome of one Monte-Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// `None` for the disturbance-free reference run.
    pub run: Option<usize>,
    pub seed: u64,
    pub summary: Option<TraceSummary>,
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: Option<SimTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub failed_runs: usize,
    pub min_min_separation: f64,
    pub violation_count: usize,
    pub runs_with_violation: usize,
    pub path_length_min: f64,
    pub path_length_mean: f64,
    pub path_length_max: f64,
    /// Largest pairwise distance between intruder positions at `spread_step`: the end
    /// of the intent path, or the last step every run reached if that comes first.
    pub intruder_terminal_spread: f64,
    pub spread_step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub nominal: RunReport,
    pub runs: Vec<RunReport>,
    pub aggregate: Aggregate,
}

fn run_report(spec: &ScenarioSpec, run: Option<usize>) -> RunReport {
    let trace = run_closed_loop(spec);
    let (trace, error) = match trace {
        Ok(t) => (Some(t), None),
        Err(SimError::Controller {
            partial,
            source,
            step,
        }) => (
            Some(*partial),
            Some(format!("controller failed at step {step}: {source}")),
        ),
        Err(e) => (None, Some(e.to_string())),
    };
    RunReport {
        run,
        seed: spec.rng_seed,
        summary: trace
            .as_ref()
            .filter(|t| !t.records.is_empty())
            .map(metrics),
        error,
        trace,
    }
}

fn aggregate(runs: &[RunReport], intent_steps: usize) -> Aggregate {
    let ok: Vec<&TraceSummary> = runs
        .iter()
        .filter(|r| r.error.is_none())
        .filter_map(|r| r.summary.as_ref())
        .collect();
    let lengths: Vec<f64> = ok.iter().map(|s| s.path_length).collect();
    let n = lengths.len().max(1) as f64;

    let traces: Vec<&SimTrace> = runs
        .iter()
        .filter(|r| r.error.is_none())
        .filter_map(|r| r.trace.as_ref())
        .collect();
    let spread_step = traces
        .iter()
        .map(|t| t.records.len().saturating_sub(1))
        .min()
        .unwrap_or(0)
        .min(intent_steps);
    let ends: Vec<Pose> = traces
        .iter()
        .map(|t| t.records[spread_step].intruder)
        .collect();
    let mut spread = 0.0f64;
    for (i, a) in ends.iter().enumerate() {
        for b in &ends[i + 1..] {
            spread = spread.max(a.distance_to(b));
        }
    }

    Aggregate {
        runs: runs.len(),
        failed_runs: runs.len() - ok.len(),
        min_min_separation: ok
            .iter()
            .map(|s| s.min_separation)
            .fold(f64::INFINITY, f64::min),
        violation_count: ok.iter().map(|s| s.violation_count).sum(),
        runs_with_violation: ok.iter().filter(|s| s.violation_count > 0).count(),
        path_length_min: lengths.iter().copied().fold(f64::INFINITY, f64::min),
        path_length_mean: lengths.iter().sum::<f64>() / n,
        path_length_max: lengths.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        intruder_terminal_spread: spread,
        spread_step,
    }
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}

/// Runs `runs` independently seeded encounters plus a disturbance-free reference run.
///
/// Run `i` uses seed `rng_seed + i`. Failed runs are recorded and excluded
/// from the aggregate; the report does not depend on scheduling order.
pub fn run_monte_carlo(spec: &ScenarioSpec, runs: usize) -> Result<MonteCarloReport, SimError> {
    if runs == 0 {
        return Err(SimError::InvalidSpec("runs must be at least 1".into()));
    }
    spec.validate()?;
    let intent_steps = spec.intruder_schedule()?.horizon_steps;
    let nominal_spec = ScenarioSpec {
        disturbance: Disturbance::None,
        ..spec.clone()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| SimError::InvalidSpec(format!("thread pool: {e}")))?;
    let (nominal, reports) = pool.install(|| {
        rayon::join(
            || run_report(&nominal_spec, None),
            || {
                (0..runs)
                    .into_par_iter()
                    .map(|i| {
                        let s = ScenarioSpec {
                            rng_seed: spec.rng_seed.wrapping_add(i as u64),
                            ..spec.clone()
                        };
                        run_report(&s, Some(i))
                    })
                    .collect::<Vec<_>>()
            },
        )
    });
    Ok(MonteCarloReport {
        aggregate: aggregate(&reports, intent_steps),
        nominal,
        runs: reports,
    })
}
