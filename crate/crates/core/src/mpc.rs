//! Intent-aware scenario-tree MPC for the ownship.
//!
//! Each receding-horizon problem is transcribed by single shooting: the
//! decision vector is the ownship input sequence
//! `z = (u_0..u_{N-1}, v_0..v_{N-1})` and the predicted states come from
//! rolling out the Euler model. The intruder's predicted trajectories come
//! from a [`ScenarioTree`] built around its intent schedule, and every
//! scenario contributes a separation constraint at every stage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dubins::ControlSchedule;
use crate::dynamics::{
    build_scenario_tree, rollout, ControlBounds, ControlInput, DynamicsError, ScenarioTree,
    TreeShape,
};
use crate::nlp::{self, NlpProblem, SolverConfig, SolverError, SolverResult};
use crate::pose::{wrap_angle, Pose};

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("invalid MPC configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// How the intruder is predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MpcMode {
    /// Intent schedule branched into upper/lower/nominal turns over the robust horizon.
    ScenarioTree,
    /// Intent schedule only.
    Classic,
    /// Straight-line intruder prediction.
    NoIntent,
    /// No separation constraints at all.
    Unconstrained,
}

impl MpcMode {
    pub const ALL: [MpcMode; 4] = [
        MpcMode::ScenarioTree,
        MpcMode::Classic,
        MpcMode::NoIntent,
        MpcMode::Unconstrained,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MpcMode::ScenarioTree => "scenario-tree",
            MpcMode::Classic => "classic",
            MpcMode::NoIntent => "no-intent",
            MpcMode::Unconstrained => "unconstrained",
        }
    }

    pub fn parse(s: &str) -> Option<MpcMode> {
        MpcMode::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

pub type Mat3 = [[f64; 3]; 3];

fn diag(d: [f64; 3]) -> Mat3 {
    [[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]]
}

fn det2(m: &Mat3, i: usize, j: usize) -> f64 {
    m[i][i] * m[j][j] - m[i][j] * m[j][i]
}

fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn is_symmetric(m: &Mat3) -> bool {
    (0..3).all(|i| (0..3).all(|j| (m[i][j] - m[j][i]).abs() <= 1e-12 * (1.0 + m[i][j].abs())))
}

/// All principal minors non-negative.
fn is_psd(m: &Mat3) -> bool {
    let tol = -1e-12;
    (0..3).all(|i| m[i][i] >= tol)
        && det2(m, 0, 1) >= tol
        && det2(m, 0, 2) >= tol
        && det2(m, 1, 2) >= tol
        && det3(m) >= tol
}

/// Leading principal minors positive.
fn is_pd(m: &Mat3) -> bool {
    m[0][0] > 0.0 && det2(m, 0, 1) > 0.0 && det3(m) > 0.0
}

fn quad_form(m: &Mat3, e: [f64; 3]) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            acc += e[i] * m[i][j] * e[j];
        }
    }
    acc
}

fn mat_vec(m: &Mat3, e: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * e[0] + m[i][1] * e[1] + m[i][2] * e[2])
}

/// Stage, terminal and turn-rate smoothing weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcWeights {
    pub q: Mat3,
    pub q_f: Mat3,
    pub r: f64,
}

impl Default for MpcWeights {
    fn default() -> Self {
        Self::from_diagonals([0.01, 0.01, 0.0], [1.0, 1.0, 10.0], 100.0)
    }
}

impl MpcWeights {
    pub fn from_diagonals(q: [f64; 3], q_f: [f64; 3], r: f64) -> Self {
        Self {
            q: diag(q),
            q_f: diag(q_f),
            r,
        }
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        let finite = self
            .q
            .iter()
            .chain(&self.q_f)
            .flatten()
            .all(|v| v.is_finite());
        if !finite || !self.r.is_finite() {
            return Err(MpcError::Config("weights must be finite".into()));
        }
        if !is_symmetric(&self.q) || !is_psd(&self.q) {
            return Err(MpcError::Config(
                "Q must be symmetric positive semidefinite".into(),
            ));
        }
        if !is_symmetric(&self.q_f) || !is_pd(&self.q_f) {
            return Err(MpcError::Config(
                "Qf must be symmetric positive definite".into(),
            ));
        }
        if self.r <= 0.0 {
            return Err(MpcError::Config(format!(
                "R must be positive, got {}",
                self.r
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    /// Prediction horizon N, in steps.
    pub horizon: usize,
    /// Robust horizon N_r, in steps.
    pub robust_horizon: usize,
    pub dt: f64,
    /// Minimum horizontal separation, meters.
    pub rho: f64,
    /// Extra clearance added to `rho` on predicted stages 1..N.
    pub safety_margin: f64,
    pub weights: MpcWeights,
    pub own_bounds: ControlBounds,
    pub intruder_bounds: ControlBounds,
    pub mode: MpcMode,
    pub target: Pose,
    pub solver: SolverConfig,
}

pub const DEFAULT_RHO: f64 = 150.0;
pub const DEFAULT_SAFETY_MARGIN: f64 = 0.25;

impl MpcConfig {
    /// N = 30, N_r = 3, dt = 1 s with the default weights and action sets.
    pub fn with_target(target: Pose) -> Self {
        Self {
            horizon: 30,
            robust_horizon: 3,
            dt: 1.0,
            rho: DEFAULT_RHO,
            safety_margin: DEFAULT_SAFETY_MARGIN,
            weights: MpcWeights::default(),
            own_bounds: ControlBounds::ownship_default(),
            intruder_bounds: ControlBounds::intruder_default(),
            mode: MpcMode::ScenarioTree,
            target,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        if self.horizon == 0 {
            return Err(MpcError::Config("horizon must be >= 1".into()));
        }
        if self.robust_horizon > self.horizon {
            return Err(MpcError::Config(format!(
                "robust horizon {} exceeds horizon {}",
                self.robust_horizon, self.horizon
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(MpcError::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.mode != MpcMode::Unconstrained && !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(MpcError::Config(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if !(self.safety_margin >= 0.0 && self.safety_margin.is_finite()) {
            return Err(MpcError::Config(format!(
                "safety margin must be non-negative, got {}",
                self.safety_margin
            )));
        }
        if !self.target.is_finite() {
            return Err(MpcError::Config("target pose must be finite".into()));
        }
        self.weights.validate()?;
        self.own_bounds.validate()?;
        self.intruder_bounds.validate()?;
        self.solver.validate()?;
        Ok(())
    }

    /// Tree shape implied by the mode: full branching only in scenario-tree mode.
    pub fn tree_shape(&self) -> Result<TreeShape, MpcError> {
        let nr = match self.mode {
            MpcMode::ScenarioTree => self.robust_horizon,
            _ => 0,
        };
        Ok(TreeShape::new(3, nr, self.horizon)?)
    }

    /// Cold start: no turn at maximum speed.
    pub fn cold_start(&self) -> Vec<f64> {
        let n = self.horizon;
        let mut z = vec![0.0f64.clamp(self.own_bounds.u_min, self.own_bounds.u_max); 2 * n];
        z[n..].iter_mut().for_each(|v| *v = self.own_bounds.v_max);
        z
    }
}

/// The transcribed receding-horizon problem.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    own_now: Pose,
    target: Pose,
    horizon: usize,
    dt: f64,
    weights: MpcWeights,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Intruder positions per scenario, stages 0..=N. Empty when unconstrained.
    obstacles: Vec<Vec<(f64, f64)>>,
    rho: f64,
    safety_margin: f64,
    /// Objective divisor so the solver sees O(1) costs.
    cost_scale: f64,
}

struct Stage {
    poses: Vec<Pose>,
}

impl MpcProblem {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn scenario_count(&self) -> usize {
        self.obstacles.len()
    }

    pub fn cost_scale(&self) -> f64 {
        self.cost_scale
    }

    /// Splits `z` into per-stage inputs.
    pub fn inputs(&self, z: &[f64]) -> Vec<ControlInput> {
        let n = self.horizon;
        (0..n).map(|k| ControlInput::new(z[n + k], z[k])).collect()
    }

    fn simulate(&self, z: &[f64]) -> Stage {
        Stage {
            poses: rollout(self.own_now, &self.inputs(z), self.dt),
        }
    }

    fn error(&self, p: &Pose) -> [f64; 3] {
        [
            p.x - self.target.x,
            p.y - self.target.y,
            wrap_angle(p.heading - self.target.heading),
        ]
    }

    /// Unscaled cost of the input sequence `z`.
    pub fn cost(&self, z: &[f64]) -> f64 {
        let st = self.simulate(z);
        let n = self.horizon;
        let mut j = quad_form(&self.weights.q_f, self.error(&st.poses[n]));
        for p in &st.poses[..n] {
            j += quad_form(&self.weights.q, self.error(p));
        }
        for k in 1..n {
            let du = z[k] - z[k - 1];
            j += self.weights.r * du * du;
        }
        j
    }

    fn stage_rho(&self, k: usize) -> f64 {
        if k == 0 {
            self.rho
        } else {
            self.rho + self.safety_margin
        }
    }

    /// Backward sweep: turns state sensitivities into input gradients.
    ///
    /// `lx`, `ly`, `ls` are partials of some scalar w.r.t. x_k, y_k, heading_k.
    fn adjoint(
        &self,
        z: &[f64],
        poses: &[Pose],
        lx: &[f64],
        ly: &[f64],
        ls: &[f64],
        out: &mut [f64],
    ) {
        let n = self.horizon;
        let (mut px, mut py, mut ps) = (lx[n], ly[n], ls[n]);
        for k in (0..n).rev() {
            let (s, c) = poses[k].heading.sin_cos();
            let v = z[n + k];
            out[k] += self.dt * ps;
            out[n + k] += self.dt * (c * px + s * py);
            ps = ls[k] + ps + self.dt * v * (c * py - s * px);
            px += lx[k];
            py += ly[k];
        }
    }
}

impl NlpProblem for MpcProblem {
    fn dim(&self) -> usize {
        2 * self.horizon
    }

    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn num_constraints(&self) -> usize {
        self.obstacles.len() * (self.horizon + 1)
    }

    fn objective(&self, z: &[f64]) -> f64 {
        self.cost(z) / self.cost_scale
    }

    fn objective_gradient(&self, z: &[f64], grad: &mut [f64]) {
        let n = self.horizon;
        let st = self.simulate(z);
        let mut lx = vec![0.0; n + 1];
        let mut ly = vec![0.0; n + 1];
        let mut ls = vec![0.0; n + 1];
        for (k, p) in st.poses.iter().enumerate() {
            let w = if k == n {
                &self.weights.q_f
            } else {
                &self.weights.q
            };
            let g = mat_vec(w, self.error(p));
            lx[k] = 2.0 * g[0];
            ly[k] = 2.0 * g[1];
            ls[k] = 2.0 * g[2];
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.adjoint(z, &st.poses, &lx, &ly, &ls, grad);
        for k in 1..n {
            let d = 2.0 * self.weights.r * (z[k] - z[k - 1]);
            grad[k] += d;
            grad[k - 1] -= d;
        }
        grad.iter_mut().for_each(|g| *g /= self.cost_scale);
    }

    /// `c_{j,k} = (rho_k^2 - |p_k - q_{j,k}|^2) / rho^2`, index `j * (N + 1) + k`.
    fn constraints(&self, z: &[f64], out: &mut [f64]) {
        let st = self.simulate(z);
        let inv = 1.0 / (self.rho * self.rho);
        let n1 = self.horizon + 1;
        for (j, obs) in self.obstacles.iter().enumerate() {
            for (k, (p, &(ox, oy))) in st.poses.iter().zip(obs).enumerate() {
                let dx = p.x - ox;
                let dy = p.y - oy;
                let rk = self.stage_rho(k);
                out[j * n1 + k] = (rk * rk - (dx * dx + dy * dy)) * inv;
            }
        }
    }

    fn constraint_vjp(&self, z: &[f64], weights: &[f64], out: &mut [f64]) {
        let n1 = self.horizon + 1;
        let st = self.simulate(z);
        let inv = 1.0 / (self.rho * self.rho);
        let mut lx = vec![0.0; n1];
        let mut ly = vec![0.0; n1];
        let ls = vec![0.0; n1];
        for (j, obs) in self.obstacles.iter().enumerate() {
            for (k, (p, &(ox, oy))) in st.poses.iter().zip(obs).enumerate() {
                let w = weights[j * n1 + k];
                if w != 0.0 {
                    lx[k] -= 2.0 * w * (p.x - ox) * inv;
                    ly[k] -= 2.0 * w * (p.y - oy) * inv;
                }
            }
        }
        self.adjoint(z, &st.poses, &lx, &ly, &ls, out);
    }
}

/// Builds the problem for the ownship at `own_now` and the intruder at
/// `intruder_now`, at absolute step `t` of the intent schedule.
pub fn build_problem(
    own_now: Pose,
    intruder_now: Pose,
    t: usize,
    intent_schedule: &ControlSchedule,
    config: &MpcConfig,
) -> Result<(MpcProblem, ScenarioTree), MpcError> {
    config.validate()?;
    if !own_now.is_finite() || !intruder_now.is_finite() {
        return Err(MpcError::Config("current poses must be finite".into()));
    }
    let shape = config.tree_shape()?;
    let straight;
    let schedule = if config.mode == MpcMode::NoIntent {
        straight = ControlSchedule::straight(config.intruder_bounds.v_max, config.dt);
        &straight
    } else {
        intent_schedule
    };
    let tree = build_scenario_tree(
        intruder_now,
        schedule,
        t,
        &config.intruder_bounds,
        &shape,
        config.dt,
    )?;
    let obstacles = if config.mode == MpcMode::Unconstrained {
        Vec::new()
    } else {
        tree.trajectories
            .iter()
            .map(|traj| traj.iter().map(|p| (p.x, p.y)).collect())
            .collect()
    };

    let n = config.horizon;
    let b = &config.own_bounds;
    let mut lower = vec![b.u_min; 2 * n];
    let mut upper = vec![b.u_max; 2 * n];
    lower[n..].iter_mut().for_each(|v| *v = b.v_min);
    upper[n..].iter_mut().for_each(|v| *v = b.v_max);

    let mut problem = MpcProblem {
        own_now,
        target: config.target,
        horizon: n,
        dt: config.dt,
        weights: config.weights.clone(),
        lower,
        upper,
        obstacles,
        rho: config.rho,
        safety_margin: config.safety_margin,
        cost_scale: 1.0,
    };
    problem.cost_scale = problem.cost(&config.cold_start()).max(1.0);
    Ok((problem, tree))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcSolution {
    /// Absolute step the problem was solved at.
    pub t: usize,
    /// Input applied to the plant, inside the ownship bounds.
    pub first_input: ControlInput,
    /// Full optimized input sequence.
    pub plan: Vec<ControlInput>,
    pub own_predicted: Vec<Pose>,
    pub intruder_scenarios: ScenarioTree,
    pub solver: SolverResult,
    /// Unscaled objective at the solution.
    pub cost_value: f64,
}

fn warm_start(warm: &MpcSolution, t: usize, config: &MpcConfig) -> Option<Vec<f64>> {
    let n = config.horizon;
    if warm.plan.len() != n || t < warm.t {
        return None;
    }
    let shift = t - warm.t;
    if shift >= n {
        return None;
    }
    let mut z = vec![0.0; 2 * n];
    for k in 0..n {
        let src = warm.plan[(k + shift).min(n - 1)];
        z[k] = src.u;
        z[n + k] = src.v;
    }
    Some(z)
}

/// Solves one receding-horizon step.
///
/// With a previous solution, the initial guess is its plan shifted by the
/// number of steps elapsed since it was computed, repeating the last stage.
/// Otherwise the cold start (no turn, maximum speed) is used.
pub fn solve_step(
    own_now: Pose,
    intruder_now: Pose,
    t: usize,
    intent_schedule: &ControlSchedule,
    config: &MpcConfig,
    warm: Option<&MpcSolution>,
) -> Result<MpcSolution, MpcError> {
    let (problem, tree) = build_problem(own_now, intruder_now, t, intent_schedule, config)?;
    let z0 = warm
        .and_then(|w| warm_start(w, t, config))
        .unwrap_or_else(|| config.cold_start());
    let result = nlp::solve(&problem, &z0, &config.solver)?;
    let plan = problem.inputs(&result.z_star);
    let own_predicted = rollout(own_now, &plan, config.dt);
    let cost_value = problem.cost(&result.z_star);
    Ok(MpcSolution {
        t,
        first_input: config.own_bounds.clamp(plan[0]),
        plan,
        own_predicted,
        intruder_scenarios: tree,
        solver: result,
        cost_value,
    })
}
