//! Discrete-time planar kinematics and the intruder scenario tree.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dubins::ControlSchedule;
use crate::pose::Pose;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("{0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    /// Linear speed, m/s.
    pub v: f64,
    /// Angular rate, rad/s.
    pub u: f64,
}

impl ControlInput {
    pub const fn new(v: f64, u: f64) -> Self {
        Self { v, u }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub v_min: f64,
    pub v_max: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl ControlBounds {
    pub fn new(v_min: f64, v_max: f64, u_min: f64, u_max: f64) -> Result<Self, DynamicsError> {
        let b = Self {
            v_min,
            v_max,
            u_min,
            u_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// Ownship action set: v in [6, 9] m/s, u in [-0.1, 0.1] rad/s.
    pub fn ownship_default() -> Self {
        Self {
            v_min: 6.0,
            v_max: 9.0,
            u_min: -0.1,
            u_max: 0.1,
        }
    }

    /// Intruder action set: v = 10 m/s, u in [-0.07, 0.07] rad/s.
    pub fn intruder_default() -> Self {
        Self {
            v_min: 10.0,
            v_max: 10.0,
            u_min: -0.07,
            u_max: 0.07,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let all = [self.v_min, self.v_max, self.u_min, self.u_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::InvalidInput(format!(
                "control bounds must be finite: {self:?}"
            )));
        }
        if self.v_min <= 0.0 {
            return Err(DynamicsError::InvalidInput(format!(
                "v_min must be positive, got {}",
                self.v_min
            )));
        }
        if self.v_min > self.v_max || self.u_min > self.u_max {
            return Err(DynamicsError::InvalidInput(format!(
                "lower bound exceeds upper bound: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn clamp(&self, input: ControlInput) -> ControlInput {
        ControlInput {
            v: input.v.clamp(self.v_min, self.v_max),
            u: input.u.clamp(self.u_min, self.u_max),
        }
    }

    pub fn contains(&self, input: ControlInput) -> bool {
        (self.v_min..=self.v_max).contains(&input.v) && (self.u_min..=self.u_max).contains(&input.u)
    }

    /// Minimum turn radius when flying at `v_max` with rate bound `max(|u_min|, |u_max|)`.
    pub fn min_turn_radius(&self) -> f64 {
        self.v_max / self.u_max.abs().max(self.u_min.abs())
    }
}

/// One Euler step of the unicycle model. Heading is not wrapped.
pub fn step(state: Pose, input: ControlInput, dt: f64) -> Pose {
    Pose {
        x: state.x + dt * input.v * state.heading.cos(),
        y: state.y + dt * input.v * state.heading.sin(),
        heading: state.heading + dt * input.u,
    }
}

/// Iterates [`step`]; the result starts with `initial` and has `inputs.len() + 1` poses.
pub fn rollout(initial: Pose, inputs: &[ControlInput], dt: f64) -> Vec<Pose> {
    let mut out = Vec::with_capacity(inputs.len() + 1);
    out.push(initial);
    let mut s = initial;
    for &input in inputs {
        s = step(s, input, dt);
        out.push(s);
    }
    out
}

/// Which realization a scenario uses at a given stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Upper,
    Lower,
    Nominal,
}

impl Branch {
    pub fn from_index(i: usize) -> Branch {
        match i {
            0 => Branch::Upper,
            1 => Branch::Lower,
            _ => Branch::Nominal,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Branch::Upper => 0,
            Branch::Lower => 1,
            Branch::Nominal => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeShape {
    /// Branches per stage.
    pub branching: usize,
    /// Stages that branch (N_r).
    pub robust_horizon: usize,
    /// Prediction horizon (N).
    pub horizon: usize,
}

impl TreeShape {
    pub fn new(
        branching: usize,
        robust_horizon: usize,
        horizon: usize,
    ) -> Result<Self, DynamicsError> {
        if branching == 0 {
            return Err(DynamicsError::InvalidInput("branching must be >= 1".into()));
        }
        if horizon == 0 {
            return Err(DynamicsError::InvalidInput("horizon must be >= 1".into()));
        }
        if robust_horizon > horizon {
            return Err(DynamicsError::InvalidInput(format!(
                "robust horizon {robust_horizon} exceeds horizon {horizon}"
            )));
        }
        Ok(Self {
            branching,
            robust_horizon,
            horizon,
        })
    }

    /// Number of scenarios, `branching ^ robust_horizon`.
    pub fn scenario_count(&self) -> usize {
        self.branching.pow(self.robust_horizon as u32)
    }
}

/// Branch used by scenario `j` (1-based) at stage `k`.
///
/// For `k < N_r` this is `(ceil(j / m^(N_r-1-k)) - 1) mod m`; past the
/// robust horizon every scenario is nominal.
pub fn branch_index(j: usize, k: usize, shape: &TreeShape) -> Result<usize, DynamicsError> {
    let m = shape.scenario_count();
    if j < 1 || j > m {
        return Err(DynamicsError::InvalidInput(format!(
            "scenario index {j} outside 1..={m}"
        )));
    }
    if k >= shape.horizon {
        return Err(DynamicsError::InvalidInput(format!(
            "stage {k} outside 0..{}",
            shape.horizon
        )));
    }
    if k >= shape.robust_horizon {
        return Ok(Branch::Nominal.index());
    }
    let block = shape.branching.pow((shape.robust_horizon - 1 - k) as u32);
    Ok((j.div_ceil(block) - 1) % shape.branching)
}

/// Nominal intent rate at absolute step `t`, clamped to the intruder's action set.
pub fn nominal_rate(schedule: &ControlSchedule, t: usize, bounds: &ControlBounds) -> f64 {
    schedule.rate_at(t).clamp(bounds.u_min, bounds.u_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTree {
    pub shape: TreeShape,
    /// Branch tuple of each scenario over stages `0..horizon`.
    pub branches: Vec<Vec<Branch>>,
    /// `M` sequences of `N` intruder inputs.
    pub control_sequences: Vec<Vec<ControlInput>>,
    /// `M` sequences of `N + 1` intruder poses.
    pub trajectories: Vec<Vec<Pose>>,
}

impl ScenarioTree {
    pub fn scenario_count(&self) -> usize {
        self.trajectories.len()
    }

    /// Index of the scenario that is nominal at every stage.
    pub fn nominal_scenario(&self) -> usize {
        self.scenario_count() - 1
    }
}

/// Enumerates the intruder's scenarios from its current pose.
///
/// Stage `k` of scenario `j` flies at `v_max` with the upper rate, the lower
/// rate, or the intent rate at absolute step `t + k` (zero past the end of
/// the schedule), according to [`branch_index`].
pub fn build_scenario_tree(
    intruder_now: Pose,
    nominal_schedule: &ControlSchedule,
    t: usize,
    bounds: &ControlBounds,
    shape: &TreeShape,
    dt: f64,
) -> Result<ScenarioTree, DynamicsError> {
    if shape.branching != 3 {
        return Err(DynamicsError::InvalidInput(format!(
            "intruder tree uses three branches, got {}",
            shape.branching
        )));
    }
    let count = shape.scenario_count();
    let nominal: Vec<f64> = (0..shape.horizon)
        .map(|k| nominal_rate(nominal_schedule, t + k, bounds))
        .collect();

    let mut branches = Vec::with_capacity(count);
    let mut control_sequences = Vec::with_capacity(count);
    let mut trajectories = Vec::with_capacity(count);
    for j in 1..=count {
        let tuple: Vec<Branch> = (0..shape.horizon)
            .map(|k| branch_index(j, k, shape).map(Branch::from_index))
            .collect::<Result<_, _>>()?;
        let inputs: Vec<ControlInput> = tuple
            .iter()
            .zip(&nominal)
            .map(|(b, &u_nom)| {
                let u = match b {
                    Branch::Upper => bounds.u_max,
                    Branch::Lower => bounds.u_min,
                    Branch::Nominal => u_nom,
                };
                ControlInput::new(bounds.v_max, u)
            })
            .collect();
        trajectories.push(rollout(intruder_now, &inputs, dt));
        control_sequences.push(inputs);
        branches.push(tuple);
    }
    Ok(ScenarioTree {
        shape: *shape,
        branches,
        control_sequences,
        trajectories,
    })
}
