mod common;

use common::problems::{CircleLinear, Clip, Rosenbrock};
use intent_mpc::nlp::{
    check_gradient, solve, GradientMode, NlpProblem, SolverConfig, SolverStatus,
};

/// Two discs the solution must stay out of, plus a quadratic pull between them.
struct TwoDiscs;

impl NlpProblem for TwoDiscs {
    fn dim(&self) -> usize {
        2
    }
    fn lower(&self) -> &[f64] {
        &[-3.0, -3.0]
    }
    fn upper(&self) -> &[f64] {
        &[3.0, 3.0]
    }
    fn num_constraints(&self) -> usize {
        2
    }
    fn objective(&self, z: &[f64]) -> f64 {
        (z[0] - 0.2).powi(2) + (z[1] - 0.1).powi(2)
    }
    fn constraints(&self, z: &[f64], out: &mut [f64]) {
        out[0] = 1.0 - (z[0] * z[0] + z[1] * z[1]);
        out[1] = 0.25 - ((z[0] - 1.5).powi(2) + z[1] * z[1]);
    }
}

#[test]
fn clipped_quadratic_converges() {
    let r = solve(&Clip, &[0.0], &SolverConfig::default()).unwrap();
    assert_eq!(r.status, SolverStatus::Converged);
    assert!((r.z_star[0] - 1.0).abs() < 1e-4);
}

#[test]
fn circle_constrained_linear() {
    let r = solve(&CircleLinear, &[0.5, -0.3], &SolverConfig::default()).unwrap();
    assert_eq!(r.status, SolverStatus::Converged, "{r:?}");
    let h = -(0.5f64).sqrt();
    assert!(
        (r.z_star[0] - h).abs() < 1e-4 && (r.z_star[1] - h).abs() < 1e-4,
        "{:?}",
        r.z_star
    );
    assert!((r.objective_value + 2f64.sqrt()).abs() < 1e-4);
    let mut c = [0.0];
    CircleLinear.constraints(&r.z_star, &mut c);
    for (mu, ci) in r.multipliers.iter().zip(c) {
        assert!((mu * ci).abs() <= 10.0 * 1e-4);
    }
    // KKT multiplier is 1/sqrt(2).
    assert!((r.multipliers[0] - 0.5f64.sqrt()).abs() < 1e-3);
}

#[test]
fn rosenbrock_in_box() {
    let r = solve(&Rosenbrock, &[-1.2, 1.0], &SolverConfig::default()).unwrap();
    assert_eq!(r.status, SolverStatus::Converged, "{r:?}");
    assert!(
        (r.z_star[0] - 1.0).abs() < 1e-4 && (r.z_star[1] - 1.0).abs() < 1e-4,
        "{:?}",
        r.z_star
    );
}

#[test]
fn finite_difference_mode_agrees() {
    let cfg = SolverConfig {
        gradient_mode: GradientMode::CentralFiniteDifference,
        ..SolverConfig::default()
    };
    let fd = solve(&CircleLinear, &[0.5, -0.3], &cfg).unwrap();
    let an = solve(&CircleLinear, &[0.5, -0.3], &SolverConfig::default()).unwrap();
    assert_eq!(fd.status, SolverStatus::Converged);
    for (a, b) in fd.z_star.iter().zip(&an.z_star) {
        assert!((a - b).abs() < 1e-4);
    }
}

#[test]
fn nonconvex_exclusion_zones() {
    let r = solve(&TwoDiscs, &[0.1, 0.05], &SolverConfig::default()).unwrap();
    assert_eq!(r.status, SolverStatus::Converged, "{r:?}");
    let mut c = [0.0; 2];
    TwoDiscs.constraints(&r.z_star, &mut c);
    assert!(c.iter().all(|&ci| ci <= 1e-4));
    // Closest point of the unit circle to (0.2, 0.1).
    let n = (0.2f64).hypot(0.1);
    assert!(
        (r.z_star[0] - 0.2 / n).abs() < 1e-3 && (r.z_star[1] - 0.1 / n).abs() < 1e-3,
        "{:?}",
        r.z_star
    );
    for w in r.violation_history.windows(2) {
        assert!(w[1] <= 2.0 * w[0] + 1e-12, "{:?}", r.violation_history);
    }
}

#[test]
fn infeasible_problem_is_flagged() {
    struct Impossible;
    impl NlpProblem for Impossible {
        fn dim(&self) -> usize {
            1
        }
        fn lower(&self) -> &[f64] {
            &[-1.0]
        }
        fn upper(&self) -> &[f64] {
            &[1.0]
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn objective(&self, z: &[f64]) -> f64 {
            z[0]
        }
        fn constraints(&self, z: &[f64], out: &mut [f64]) {
            // Needs z >= 2, outside the box.
            out[0] = 2.0 - z[0];
        }
    }
    let r = solve(&Impossible, &[0.0], &SolverConfig::default()).unwrap();
    assert_eq!(r.status, SolverStatus::InfeasibleStationary);
    assert!(
        (r.z_star[0] - 1.0).abs() < 1e-9,
        "least-violation point is the upper bound"
    );
    assert!((r.max_violation - 1.0).abs() < 1e-9);
}

#[test]
fn deterministic_iterates() {
    let a = solve(&TwoDiscs, &[0.1, 0.05], &SolverConfig::default()).unwrap();
    let b = solve(&TwoDiscs, &[0.1, 0.05], &SolverConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gradient_checks() {
    assert!(check_gradient(&CircleLinear, &[0.3, -0.7]) <= 1e-7);
    assert!(check_gradient(&Rosenbrock, &[0.3, -0.7]) <= 1e-7);
}
