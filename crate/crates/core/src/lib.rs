//! Intent-aware collision avoidance for two aircraft in the horizontal plane.
//!
//! The ownship is steered by a receding-horizon controller that predicts the
//! intruder from its shared destination: the intruder's shortest Dubins path
//! gives its nominal turn-rate schedule, and a scenario tree branches that
//! schedule into worst-case turns over the first few stages. The crate also
//! carries the closed-loop simulator, Monte-Carlo harness and CLI plumbing
//! (scenario files, CSV traces, SVG plots).

pub mod cli;
pub mod dubins;
pub mod dynamics;
pub mod io;
pub mod mpc;
pub mod nlp;
pub mod pose;
pub mod sim;

pub use dubins::{
    control_schedule, shortest_path, solve_word, ControlSchedule, DubinsPath, DubinsWord,
};
pub use dynamics::{
    build_scenario_tree, rollout, step, ControlBounds, ControlInput, ScenarioTree, TreeShape,
};
pub use mpc::{MpcConfig, MpcMode, MpcSolution, MpcWeights};
pub use nlp::{NlpProblem, SolverConfig, SolverResult, SolverStatus};
pub use pose::Pose;
pub use sim::{metrics, run_closed_loop, run_monte_carlo, ScenarioSpec, SimTrace};
