use std::path::Path;

use intent_mpc::dynamics::{build_scenario_tree, rollout};
use intent_mpc::io::load_scenario;
use intent_mpc::mpc::MpcMode;
use intent_mpc::sim::{
    run_closed_loop, run_monte_carlo, Disturbance, ScenarioSpec, TerminalStatus,
};

fn scenario(name: &str) -> ScenarioSpec {
    load_scenario(
        &Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("scenarios")
            .join(name),
    )
    .unwrap()
}

#[test]
fn replaying_inputs_reproduces_ownship_bitwise() {
    let spec = scenario("reference_crossing.json");
    let trace = run_closed_loop(&spec).unwrap();
    let replay = rollout(spec.own_start, &trace.applied_inputs(), spec.mpc.dt);
    assert_eq!(replay, trace.own_poses());
}

#[test]
fn undisturbed_intruder_follows_the_nominal_scenario() {
    let spec = scenario("reference_crossing.json");
    let trace = run_closed_loop(&spec).unwrap();
    let sched = spec.intruder_schedule().unwrap();
    let shape = spec.mpc.tree_shape().unwrap();
    let intr = trace.intruder_poses();
    for t in [0, 10, 40, 80] {
        let tree = build_scenario_tree(
            intr[t],
            &sched,
            t,
            &spec.mpc.intruder_bounds,
            &shape,
            spec.mpc.dt,
        )
        .unwrap();
        let nominal = &tree.trajectories[tree.nominal_scenario()];
        let k = nominal.len().min(intr.len() - t);
        assert_eq!(nominal[..k], intr[t..t + k], "stage {t}");
    }
}

#[test]
fn reference_run_is_safe_and_arrives() {
    let spec = scenario("reference_crossing.json");
    let trace = run_closed_loop(&spec).unwrap();
    let m = trace.summary();
    assert_eq!(m.terminal, TerminalStatus::Arrived);
    assert!(m.min_separation >= spec.rho() - 1e-3);
    let last = trace.records.last().unwrap();
    assert!(last.input.is_none());
    assert!(last.own.distance_to(&spec.own_target()) <= spec.target_radius);
    for r in &trace.records[..trace.records.len() - 1] {
        let c = r.input.unwrap();
        assert!(spec.mpc.own_bounds.contains(c), "{c:?}");
    }
}

#[test]
fn unconstrained_mode_cuts_through_the_safety_radius() {
    let mut spec = scenario("reference_crossing.json");
    spec.mpc.mode = MpcMode::Unconstrained;
    let m = run_closed_loop(&spec).unwrap().summary();
    assert!(m.min_separation < spec.rho());
    assert!(m.violation_count > 0);
    assert_eq!(m.terminal, TerminalStatus::ViolationFlagged);
}

#[test]
fn disturbed_runs_are_seed_deterministic() {
    let mut spec = scenario("reference_montecarlo.json");
    spec.mpc.mode = MpcMode::Classic;
    let a = run_closed_loop(&spec).unwrap();
    let b = run_closed_loop(&spec).unwrap();
    assert_eq!(a, b);
    spec.rng_seed += 1;
    let c = run_closed_loop(&spec).unwrap();
    assert_ne!(a.intruder_poses(), c.intruder_poses());
}

#[test]
fn single_undisturbed_run_equals_nominal() {
    let mut spec = scenario("reference_crossing.json");
    spec.disturbance = Disturbance::None;
    spec.mpc.mode = MpcMode::Classic;
    let report = run_monte_carlo(&spec, 1).unwrap();
    assert_eq!(report.runs.len(), 1);
    assert_eq!(report.runs[0].trace, report.nominal.trace);
    assert_eq!(report.aggregate.intruder_terminal_spread, 0.0);
    assert_eq!(report.aggregate.failed_runs, 0);
}

#[test]
fn monte_carlo_is_independent_of_thread_count() {
    let mut spec = scenario("reference_montecarlo.json");
    spec.mpc.mode = MpcMode::Classic;
    let a = run_monte_carlo(&spec, 4).unwrap();
    let b = run_monte_carlo(&spec, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        a.runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
        vec![2024, 2025, 2026, 2027]
    );
    assert!(a.aggregate.intruder_terminal_spread > 0.0);
}

#[test]
fn max_steps_cutoff_is_recorded() {
    let mut spec = scenario("reference_crossing.json");
    spec.max_steps = 20;
    let trace = run_closed_loop(&spec).unwrap();
    assert_eq!(trace.records.len(), 21);
    assert!(!trace.arrived);
    assert_eq!(trace.terminal, TerminalStatus::MaxSteps);
    assert_eq!(trace.applied_inputs().len(), 20);
}
