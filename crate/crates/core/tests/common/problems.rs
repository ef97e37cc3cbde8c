//! Small problems with known optima.

use intent_mpc::nlp::NlpProblem;

/// (z - 3)^2 on [-1, 1]; optimum at the upper bound.
pub struct Clip;

impl NlpProblem for Clip {
    fn dim(&self) -> usize {
        1
    }
    fn lower(&self) -> &[f64] {
        &[-1.0]
    }
    fn upper(&self) -> &[f64] {
        &[1.0]
    }
    fn objective(&self, z: &[f64]) -> f64 {
        (z[0] - 3.0).powi(2)
    }
}

/// x + y subject to x^2 + y^2 <= 1; optimum at -(1, 1)/sqrt(2).
pub struct CircleLinear;

impl NlpProblem for CircleLinear {
    fn dim(&self) -> usize {
        2
    }
    fn lower(&self) -> &[f64] {
        &[-2.0, -2.0]
    }
    fn upper(&self) -> &[f64] {
        &[2.0, 2.0]
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn objective(&self, z: &[f64]) -> f64 {
        z[0] + z[1]
    }
    fn constraints(&self, z: &[f64], out: &mut [f64]) {
        out[0] = z[0] * z[0] + z[1] * z[1] - 1.0;
    }
    fn objective_gradient(&self, _z: &[f64], g: &mut [f64]) {
        g[0] = 1.0;
        g[1] = 1.0;
    }
    fn constraint_vjp(&self, z: &[f64], w: &[f64], out: &mut [f64]) {
        out[0] += w[0] * 2.0 * z[0];
        out[1] += w[0] * 2.0 * z[1];
    }
}

pub struct Rosenbrock;

impl NlpProblem for Rosenbrock {
    fn dim(&self) -> usize {
        2
    }
    fn lower(&self) -> &[f64] {
        &[-5.0, -5.0]
    }
    fn upper(&self) -> &[f64] {
        &[5.0, 5.0]
    }
    fn objective(&self, z: &[f64]) -> f64 {
        (1.0 - z[0]).powi(2) + 100.0 * (z[1] - z[0] * z[0]).powi(2)
    }
    fn objective_gradient(&self, z: &[f64], g: &mut [f64]) {
        g[0] = -2.0 * (1.0 - z[0]) - 400.0 * z[0] * (z[1] - z[0] * z[0]);
        g[1] = 200.0 * (z[1] - z[0] * z[0]);
    }
}
