use intent_mpc::dubins::{control_schedule, shortest_path, ControlSchedule};
use intent_mpc::mpc::{build_problem, solve_step, MpcConfig, MpcMode};
use intent_mpc::nlp::{check_gradient, NlpProblem, SolverStatus};
use intent_mpc::pose::Pose;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn intent(start: Pose, goal: Pose) -> ControlSchedule {
    let path = shortest_path(start, goal, 10.0 / 0.07).unwrap();
    control_schedule(&path, 10.0, 1.0).unwrap()
}

/// Crossing geometry: intruder heads north across the ownship's eastbound track.
fn crossing() -> (Pose, Pose, ControlSchedule, MpcConfig) {
    let own = Pose::new(0.0, 0.0, 0.0);
    let intr = Pose::new(420.0, -380.0, std::f64::consts::FRAC_PI_2);
    let sched = intent(intr, Pose::new(500.0, 600.0, 1.2));
    let cfg = MpcConfig::with_target(Pose::new(1000.0, 0.0, 0.0));
    (own, intr, sched, cfg)
}

fn with_mode(cfg: &MpcConfig, mode: MpcMode) -> MpcConfig {
    MpcConfig {
        mode,
        ..cfg.clone()
    }
}

#[test]
fn constraint_counts_follow_tree_size() {
    let (own, intr, sched, cfg) = crossing();
    let expected = [
        (MpcMode::ScenarioTree, 27 * 31),
        (MpcMode::Classic, 31),
        (MpcMode::NoIntent, 31),
        (MpcMode::Unconstrained, 0),
    ];
    for (mode, count) in expected {
        let (p, _) = build_problem(own, intr, 0, &sched, &with_mode(&cfg, mode)).unwrap();
        assert_eq!(p.dim(), 60);
        assert_eq!(p.num_constraints(), count, "{mode:?}");
    }
    for nr in 0..=3 {
        let c = MpcConfig {
            robust_horizon: nr,
            ..cfg.clone()
        };
        let (p, tree) = build_problem(own, intr, 0, &sched, &c).unwrap();
        assert_eq!(tree.scenario_count(), 3usize.pow(nr as u32));
        assert_eq!(p.num_constraints(), tree.scenario_count() * 31);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let (own, intr, sched, cfg) = crossing();
    let (p, _) = build_problem(own, intr, 5, &sched, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let z: Vec<f64> = (0..p.dim())
            .map(|i| rng.gen_range(p.lower()[i]..=p.upper()[i]))
            .collect();
        let d = check_gradient(&p, &z);
        assert!(d <= 1e-5, "discrepancy {d}");
    }
}

#[test]
fn far_intruder_flies_straight_at_max_speed() {
    let own = Pose::new(0.0, 0.0, 0.0);
    let intr = Pose::new(10_000.0, 0.0, std::f64::consts::PI);
    let sched = ControlSchedule::straight(10.0, 1.0);
    let cfg = MpcConfig::with_target(Pose::new(200.0, 0.0, 0.0));
    let sol = solve_step(own, intr, 0, &sched, &cfg, None).unwrap();
    assert!(
        (sol.first_input.v - 9.0).abs() < 1e-6,
        "{:?}",
        sol.first_input
    );
    assert!(sol.first_input.u.abs() <= 1e-3, "{:?}", sol.first_input);
    assert_eq!(
        sol.solver.status,
        SolverStatus::Converged,
        "{:?}",
        sol.solver
    );
}

#[test]
fn unconstrained_matches_intruder_free_optimum() {
    let (own, intr, sched, cfg) = crossing();
    let cfg = with_mode(&cfg, MpcMode::Unconstrained);
    let a = solve_step(own, intr, 0, &sched, &cfg, None).unwrap();
    let b = solve_step(own, Pose::new(-4000.0, 9000.0, 0.0), 0, &sched, &cfg, None).unwrap();
    assert_eq!(a.solver.z_star, b.solver.z_star);
}

#[test]
fn warm_resolve_at_same_state() {
    let (_own, _intr, sched, cfg) = crossing();
    let own = Pose::new(300.0, 10.0, 0.1);
    let intr = Pose::new(420.0, -200.0, std::f64::consts::FRAC_PI_2);
    let cold = solve_step(own, intr, 18, &sched, &cfg, None).unwrap();
    let warm = solve_step(own, intr, 18, &sched, &cfg, Some(&cold)).unwrap();
    assert!(warm.solver.inner_iters_total <= cold.solver.inner_iters_total);
    let rel = (warm.cost_value - cold.cost_value).abs() / cold.cost_value;
    assert!(
        rel < 1e-3,
        "cost {} vs {}",
        warm.cost_value,
        cold.cost_value
    );
    assert!((warm.first_input.u - cold.first_input.u).abs() < 5e-3);
    assert!((warm.first_input.v - cold.first_input.v).abs() < 5e-2);
}

#[test]
fn no_intent_predicts_a_straight_ray() {
    let (own, intr, sched, cfg) = crossing();
    let (_, tree) =
        build_problem(own, intr, 0, &sched, &with_mode(&cfg, MpcMode::NoIntent)).unwrap();
    assert_eq!(tree.scenario_count(), 1);
    for p in &tree.trajectories[0] {
        assert_eq!(p.heading, intr.heading);
        assert!((p.x - intr.x).abs() < 1e-9);
    }
}

#[test]
fn scenario_tree_is_more_conservative_than_classic() {
    let (_, intr0, _, cfg) = crossing();
    let path = shortest_path(intr0, Pose::new(500.0, 600.0, 1.2), 10.0 / 0.07).unwrap();
    let sched = control_schedule(&path, 10.0, 1.0).unwrap();
    let t = 5;
    let own = Pose::new(45.0, 0.0, 0.0);
    let intr = path.sample_pose(50.0).unwrap();
    let st = solve_step(own, intr, t, &sched, &cfg, None).unwrap();
    let classic_cfg = with_mode(&cfg, MpcMode::Classic);
    let cl = solve_step(own, intr, t, &sched, &classic_cfg, None).unwrap();
    assert_eq!(st.solver.status, SolverStatus::Converged, "{:?}", st.solver);
    assert_eq!(cl.solver.status, SolverStatus::Converged, "{:?}", cl.solver);

    // Every scenario-tree feasible point satisfies the classic constraints.
    let (cp, _) = build_problem(own, intr, t, &sched, &classic_cfg).unwrap();
    let mut c = vec![0.0; cp.num_constraints()];
    cp.constraints(&st.solver.z_star, &mut c);
    assert!(c.iter().all(|&v| v <= cfg.solver.constraint_tol), "{c:?}");

    let tol = 1e-3 * cl.cost_value.abs().max(1.0);
    assert!(
        cl.cost_value <= st.cost_value + tol,
        "{} > {}",
        cl.cost_value,
        st.cost_value
    );
    assert!(
        st.cost_value > cl.cost_value,
        "tree constraints should bind here"
    );
}

#[test]
fn first_input_respects_bounds() {
    let (own, intr, sched, cfg) = crossing();
    for mode in MpcMode::ALL {
        let c = with_mode(&cfg, mode);
        let sol = solve_step(own, intr, 0, &sched, &c, None).unwrap();
        assert!(c.own_bounds.contains(sol.first_input));
        assert_eq!(sol.own_predicted.len(), 31);
    }
}
