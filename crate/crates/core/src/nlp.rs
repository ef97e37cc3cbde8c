//! Box-constrained nonlinear programming with smooth inequality constraints.
//!
//! Problems have the form
//!
//! ```text
//! minimize f(z)  subject to  c_i(z) <= 0,  lo <= z <= hi
//! ```
//!
//! The solver is an augmented Lagrangian method over the inequalities. Each
//! outer iteration minimizes
//!
//! ```text
//! L(z) = f(z) + 1/(2r) * sum_i ( max(0, mu_i + r c_i(z))^2 - mu_i^2 )
//! ```
//!
//! on the box with a projected limited-memory BFGS iteration, then updates
//! `mu_i <- max(0, mu_i + r c_i)` and grows the penalty `r` when the
//! constraint violation stalls.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative central-difference step.
pub const FD_STEP: f64 = 1e-6;

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const PENALTY_CAP: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("non-finite {what} at z = {point:?}")]
    NumericalDomain { what: &'static str, point: Vec<f64> },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid bounds at index {index}: [{lo}, {hi}]")]
    InvalidBounds { index: usize, lo: f64, hi: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// A smooth NLP on a box.
///
/// Only values are mandatory; gradients default to central differences so
/// small test problems can skip them.
pub trait NlpProblem {
    fn dim(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];

    fn num_constraints(&self) -> usize {
        0
    }

    fn objective(&self, z: &[f64]) -> f64;

    /// Writes `c_i(z)` into `out` (length [`num_constraints`](Self::num_constraints)).
    fn constraints(&self, _z: &[f64], _out: &mut [f64]) {}

    /// Overwrites `grad` with the objective gradient.
    fn objective_gradient(&self, z: &[f64], grad: &mut [f64]) {
        fd_objective_gradient(self, z, grad);
    }

    /// Adds `sum_i weights[i] * grad c_i(z)` into `out`.
    fn constraint_vjp(&self, z: &[f64], weights: &[f64], out: &mut [f64]) {
        fd_constraint_vjp(self, z, weights, out);
    }
}

fn fd_step(zi: f64) -> f64 {
    FD_STEP * zi.abs().max(1.0)
}

/// Central-difference objective gradient.
pub fn fd_objective_gradient<P: NlpProblem + ?Sized>(problem: &P, z: &[f64], grad: &mut [f64]) {
    let mut zp = z.to_vec();
    for i in 0..z.len() {
        let h = fd_step(z[i]);
        zp[i] = z[i] + h;
        let fp = problem.objective(&zp);
        zp[i] = z[i] - h;
        let fm = problem.objective(&zp);
        zp[i] = z[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
}

/// Central-difference constraint Jacobian, row-major `p x n`.
pub fn fd_constraint_jacobian<P: NlpProblem + ?Sized>(problem: &P, z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let p = problem.num_constraints();
    let mut jac = vec![0.0; p * n];
    let mut cp = vec![0.0; p];
    let mut cm = vec![0.0; p];
    let mut zp = z.to_vec();
    for i in 0..n {
        let h = fd_step(z[i]);
        zp[i] = z[i] + h;
        problem.constraints(&zp, &mut cp);
        zp[i] = z[i] - h;
        problem.constraints(&zp, &mut cm);
        zp[i] = z[i];
        for r in 0..p {
            jac[r * n + i] = (cp[r] - cm[r]) / (2.0 * h);
        }
    }
    jac
}

/// Central-difference vector-Jacobian product, accumulated into `out`.
pub fn fd_constraint_vjp<P: NlpProblem + ?Sized>(
    problem: &P,
    z: &[f64],
    weights: &[f64],
    out: &mut [f64],
) {
    let n = z.len();
    let jac = fd_constraint_jacobian(problem, z);
    for (r, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            for i in 0..n {
                out[i] += w * jac[r * n + i];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    AnalyticAdjoint,
    CentralFiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub outer_max_iters: usize,
    pub inner_max_iters: usize,
    pub constraint_tol: f64,
    /// Tolerance on the infinity norm of the projected augmented-Lagrangian gradient.
    pub optimality_tol: f64,
    pub initial_penalty: f64,
    /// Penalty multiplier applied when violation fails to shrink by 4x.
    pub penalty_growth: f64,
    pub gradient_mode: GradientMode,
    pub memory: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_max_iters: 50,
            inner_max_iters: 200,
            constraint_tol: 1e-4,
            optimality_tol: 1e-4,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            gradient_mode: GradientMode::AnalyticAdjoint,
            memory: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("constraint_tol", self.constraint_tol),
            ("optimality_tol", self.optimality_tol),
            ("initial_penalty", self.initial_penalty),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolverError::InvalidConfig(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if !(self.penalty_growth > 1.0 && self.penalty_growth.is_finite()) {
            return Err(SolverError::InvalidConfig(format!(
                "penalty_growth must be > 1, got {}",
                self.penalty_growth
            )));
        }
        if self.outer_max_iters == 0 || self.inner_max_iters == 0 || self.memory == 0 {
            return Err(SolverError::InvalidConfig(
                "iteration limits and memory must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    MaxIters,
    InfeasibleStationary,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Converged => "converged",
            SolverStatus::MaxIters => "max_iters",
            SolverStatus::InfeasibleStationary => "infeasible_stationary",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub z_star: Vec<f64>,
    pub objective_value: f64,
    pub max_violation: f64,
    pub projected_grad_norm: f64,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub status: SolverStatus,
    /// Inequality multipliers at `z_star`.
    pub multipliers: Vec<f64>,
    /// Max violation after each outer iteration.
    pub violation_history: Vec<f64>,
}

fn project(z: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((zi, &l), &h) in z.iter_mut().zip(lo).zip(hi) {
        *zi = zi.clamp(l, h);
    }
}

/// Infinity norm of `P(z - g) - z`.
pub fn projected_gradient_norm(z: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    z.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&zi, &gi), (&l, &h))| ((zi - gi).clamp(l, h) - zi).abs())
        .fold(0.0, f64::max)
}

fn max_violation(c: &[f64]) -> f64 {
    c.iter().fold(0.0, |m, &ci| m.max(ci))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

struct Evaluator<'a, P: NlpProblem + ?Sized> {
    problem: &'a P,
    mode: GradientMode,
    c: Vec<f64>,
}

impl<'a, P: NlpProblem + ?Sized> Evaluator<'a, P> {
    fn objective(&self, z: &[f64]) -> Result<f64, SolverError> {
        let f = self.problem.objective(z);
        if f.is_finite() {
            Ok(f)
        } else {
            Err(SolverError::NumericalDomain {
                what: "objective",
                point: z.to_vec(),
            })
        }
    }

    fn constraints(&mut self, z: &[f64]) -> Result<(), SolverError> {
        self.problem.constraints(z, &mut self.c);
        if self.c.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SolverError::NumericalDomain {
                what: "constraint",
                point: z.to_vec(),
            })
        }
    }

    fn merit(&mut self, z: &[f64], mu: &[f64], penalty: f64) -> Result<f64, SolverError> {
        let f = self.objective(z)?;
        self.constraints(z)?;
        let shift: f64 = self
            .c
            .iter()
            .zip(mu)
            .map(|(&ci, &mi)| {
                let w = (mi + penalty * ci).max(0.0);
                w * w - mi * mi
            })
            .sum();
        Ok(f + shift / (2.0 * penalty))
    }

    /// Merit value and gradient at `z`.
    fn merit_grad(
        &mut self,
        z: &[f64],
        mu: &[f64],
        penalty: f64,
        grad: &mut [f64],
    ) -> Result<f64, SolverError> {
        match self.mode {
            GradientMode::AnalyticAdjoint => {
                let value = self.merit(z, mu, penalty)?;
                let weights: Vec<f64> = self
                    .c
                    .iter()
                    .zip(mu)
                    .map(|(&ci, &mi)| (mi + penalty * ci).max(0.0))
                    .collect();
                self.problem.objective_gradient(z, grad);
                if weights.iter().any(|&w| w != 0.0) {
                    self.problem.constraint_vjp(z, &weights, grad);
                }
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(SolverError::NumericalDomain {
                        what: "gradient",
                        point: z.to_vec(),
                    });
                }
                Ok(value)
            }
            GradientMode::CentralFiniteDifference => {
                let mut zp = z.to_vec();
                for i in 0..z.len() {
                    let h = fd_step(z[i]);
                    zp[i] = z[i] + h;
                    let fp = self.merit(&zp, mu, penalty)?;
                    zp[i] = z[i] - h;
                    let fm = self.merit(&zp, mu, penalty)?;
                    zp[i] = z[i];
                    grad[i] = (fp - fm) / (2.0 * h);
                }
                self.merit(z, mu, penalty)
            }
        }
    }
}

struct InnerOutcome {
    iters: usize,
    value: f64,
    pg_norm: f64,
}

/// Projected L-BFGS on the box for the current merit function.
fn minimize_merit<P: NlpProblem + ?Sized>(
    ev: &mut Evaluator<'_, P>,
    z: &mut Vec<f64>,
    mu: &[f64],
    penalty: f64,
    lo: &[f64],
    hi: &[f64],
    config: &SolverConfig,
) -> Result<InnerOutcome, SolverError> {
    let n = z.len();
    let mut g = vec![0.0; n];
    let mut fz = ev.merit_grad(z, mu, penalty, &mut g)?;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut free = vec![true; n];
    let mut d = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut alpha_hist = vec![0.0; config.memory];
    let mut stalls = 0;
    let mut iters = 0;

    while iters < config.inner_max_iters {
        let pg = projected_gradient_norm(z, &g, lo, hi);
        if pg <= config.optimality_tol {
            break;
        }
        iters += 1;

        for i in 0..n {
            free[i] = !((z[i] <= lo[i] && g[i] > 0.0) || (z[i] >= hi[i] && g[i] < 0.0));
        }

        // Two-loop recursion restricted to the free variables.
        for i in 0..n {
            d[i] = if free[i] { g[i] } else { 0.0 };
        }
        let masked = |a: &[f64], b: &[f64], free: &[bool]| -> f64 {
            a.iter()
                .zip(b)
                .zip(free)
                .filter(|(_, &f)| f)
                .map(|((x, y), _)| x * y)
                .sum()
        };
        for (slot, (s, y, rho)) in memory.iter().enumerate().rev() {
            let a = rho * masked(s, &d, &free);
            alpha_hist[slot] = a;
            for i in 0..n {
                if free[i] {
                    d[i] -= a * y[i];
                }
            }
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let scale = 1.0 / norm_inf(&g).max(1e-300);
            d.iter_mut().for_each(|v| *v *= scale);
        }
        for (slot, (s, y, rho)) in memory.iter().enumerate() {
            let b = rho * masked(y, &d, &free);
            for i in 0..n {
                if free[i] {
                    d[i] += s[i] * (alpha_hist[slot] - b);
                }
            }
        }
        d.iter_mut().for_each(|v| *v = -*v);

        if dot(&d, &g) >= 0.0 {
            let scale = 1.0 / norm_inf(&g).max(1e-300);
            for i in 0..n {
                d[i] = if free[i] { -g[i] * scale } else { 0.0 };
            }
            memory.clear();
        }

        // Backtracking along the projection arc.
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                trial[i] = (z[i] + alpha * d[i]).clamp(lo[i], hi[i]);
            }
            let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - z[i])).sum();
            if decrease < 0.0 {
                let ft = ev.merit(&trial, mu, penalty)?;
                if ft <= fz + ARMIJO_C1 * decrease {
                    accepted = Some(ft);
                    break;
                }
            } else if trial == *z {
                break;
            }
            alpha *= 0.5;
        }

        let Some(_) = accepted else {
            if memory.is_empty() {
                break;
            }
            memory.clear();
            continue;
        };

        let f_new = ev.merit_grad(&trial, mu, penalty, &mut g_trial)?;
        let s: Vec<f64> = trial.iter().zip(z.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if memory.len() == config.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }

        let progress = fz - f_new;
        std::mem::swap(z, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        fz = f_new;
        if progress <= 1e-15 * fz.abs().max(1.0) {
            stalls += 1;
            if stalls >= 5 {
                break;
            }
        } else {
            stalls = 0;
        }
    }

    Ok(InnerOutcome {
        iters,
        value: fz,
        pg_norm: projected_gradient_norm(z, &g, lo, hi),
    })
}

struct Candidate {
    z: Vec<f64>,
    objective: f64,
    violation: f64,
    pg_norm: f64,
    multipliers: Vec<f64>,
}

impl Candidate {
    fn better_than(&self, other: &Candidate, tol: f64) -> bool {
        let self_ok = self.violation <= tol;
        let other_ok = other.violation <= tol;
        match (self_ok, other_ok) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => self.objective <= other.objective,
            (false, false) => self.violation <= other.violation,
        }
    }
}

/// Solves `problem` from `z0` (projected into the box first).
///
/// Deterministic for fixed inputs. When the iteration limit is hit the best
/// iterate seen is returned: the lowest objective among points within
/// `constraint_tol`, or the least-violating point if none is.
pub fn solve<P: NlpProblem + ?Sized>(
    problem: &P,
    z0: &[f64],
    config: &SolverConfig,
) -> Result<SolverResult, SolverError> {
    config.validate()?;
    let n = problem.dim();
    let lo = problem.lower();
    let hi = problem.upper();
    if z0.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            got: z0.len(),
        });
    }
    if lo.len() != n || hi.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            got: lo.len().min(hi.len()),
        });
    }
    for i in 0..n {
        if lo[i].is_nan() || hi[i].is_nan() || lo[i] > hi[i] {
            return Err(SolverError::InvalidBounds {
                index: i,
                lo: lo[i],
                hi: hi[i],
            });
        }
    }

    let p = problem.num_constraints();
    let mut ev = Evaluator {
        problem,
        mode: config.gradient_mode,
        c: vec![0.0; p],
    };
    let mut z = z0.to_vec();
    project(&mut z, lo, hi);

    let mut mu = vec![0.0; p];
    let mut penalty = config.initial_penalty;
    let mut inner_total = 0;
    let mut history = Vec::new();
    let mut best: Option<Candidate> = None;
    let mut outer = 0;
    let mut status = None;
    let mut grad = vec![0.0; n];

    ev.constraints(&z)?;
    let mut prev_violation = max_violation(&ev.c);
    let mut stuck = 0;

    while outer < config.outer_max_iters {
        outer += 1;
        let inner = minimize_merit(&mut ev, &mut z, &mu, penalty, lo, hi, config)?;
        inner_total += inner.iters;
        debug_assert!(inner.value.is_finite());

        let objective = ev.objective(&z)?;
        ev.constraints(&z)?;
        let violation = max_violation(&ev.c);
        let new_mu: Vec<f64> =
            ev.c.iter()
                .zip(&mu)
                .map(|(&ci, &mi)| (mi + penalty * ci).max(0.0))
                .collect();
        let complementarity =
            ev.c.iter()
                .zip(&new_mu)
                .fold(0.0f64, |m, (&ci, &mi)| m.max((mi * ci).abs()));

        // Stationarity of the Lagrangian with the updated multipliers is the
        // projected gradient of the merit function just minimized.
        let pg_norm = inner.pg_norm;
        history.push(violation);

        let cand = Candidate {
            z: z.clone(),
            objective,
            violation,
            pg_norm,
            multipliers: new_mu.clone(),
        };
        if best
            .as_ref()
            .is_none_or(|b| cand.better_than(b, config.constraint_tol))
        {
            best = Some(cand);
        }

        if violation <= config.constraint_tol
            && pg_norm <= config.optimality_tol
            && complementarity <= config.constraint_tol
        {
            status = Some(SolverStatus::Converged);
            best = Some(Candidate {
                z: z.clone(),
                objective,
                violation,
                pg_norm,
                multipliers: new_mu,
            });
            break;
        }

        mu = new_mu;
        if violation > config.constraint_tol && violation > 0.25 * prev_violation {
            if penalty >= PENALTY_CAP {
                stuck += 1;
                if stuck >= 3 {
                    status = Some(SolverStatus::InfeasibleStationary);
                    break;
                }
            }
            penalty = (penalty * config.penalty_growth).min(PENALTY_CAP);
        } else {
            stuck = 0;
        }
        prev_violation = violation;
    }

    let best = best.expect("at least one outer iteration runs");
    let status = match status {
        Some(SolverStatus::Converged) => SolverStatus::Converged,
        _ if best.violation > config.constraint_tol => SolverStatus::InfeasibleStationary,
        Some(s) => s,
        None => SolverStatus::MaxIters,
    };

    // Recompute stationarity at the returned point for reporting.
    let pg_norm = if status == SolverStatus::Converged {
        best.pg_norm
    } else {
        problem.objective_gradient(&best.z, &mut grad);
        if p > 0 {
            problem.constraint_vjp(&best.z, &best.multipliers, &mut grad);
        }
        projected_gradient_norm(&best.z, &grad, lo, hi)
    };

    Ok(SolverResult {
        objective_value: best.objective,
        max_violation: best.violation,
        projected_grad_norm: pg_norm,
        outer_iters: outer,
        inner_iters_total: inner_total,
        status,
        multipliers: best.multipliers,
        violation_history: history,
        z_star: best.z,
    })
}

/// Worst relative discrepancy between the problem's gradients and central differences.
///
/// Covers the objective and every constraint. Each gradient is compared as
/// `max_i |a_i - f_i| / max(|a|_inf, |f|_inf, 1)`.
pub fn check_gradient<P: NlpProblem + ?Sized>(problem: &P, z: &[f64]) -> f64 {
    let n = z.len();
    let rel = |a: &[f64], f: &[f64]| -> f64 {
        let scale = norm_inf(a).max(norm_inf(f)).max(1.0);
        a.iter()
            .zip(f)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
            / scale
    };

    let mut analytic = vec![0.0; n];
    let mut numeric = vec![0.0; n];
    problem.objective_gradient(z, &mut analytic);
    fd_objective_gradient(problem, z, &mut numeric);
    let mut worst = rel(&analytic, &numeric);

    let p = problem.num_constraints();
    if p > 0 {
        let jac = fd_constraint_jacobian(problem, z);
        let mut unit = vec![0.0; p];
        for r in 0..p {
            unit[r] = 1.0;
            analytic.iter_mut().for_each(|v| *v = 0.0);
            problem.constraint_vjp(z, &unit, &mut analytic);
            unit[r] = 0.0;
            worst = worst.max(rel(&analytic, &jac[r * n..(r + 1) * n]));
        }
    }
    worst
}
