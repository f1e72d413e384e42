//! Dense-interface nonlinear programming with an in-house augmented
//! Lagrangian solver.
//!
//! Problems have the form
//!
//! ```text
//! min f(z)  s.t.  c(z) = 0,  g(z) <= 0,  lo <= z <= hi
//! ```
//!
//! and use the Lagrangian `f + y^T c + mu^T g` with `mu >= 0`.

mod augmented;
pub mod fd;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use augmented::AugmentedLagrangian;
pub use fd::FdRule;

use crate::linalg::{norm_inf, SparseMatrix};

/// A finite-dimensional nonlinear program.
///
/// Only values are required. Derivatives default to finite differences on
/// dense copies, which is fine for small problems; large structured problems
/// should override them.
pub trait NlpProblem {
    fn dim(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    /// Variable bounds `(lo, hi)`, infinite entries allowed.
    fn bounds(&self) -> (&[f64], &[f64]);

    fn objective(&self, z: &[f64]) -> f64;
    fn eq(&self, z: &[f64], out: &mut [f64]);
    fn ineq(&self, z: &[f64], out: &mut [f64]);

    fn objective_gradient(&self, z: &[f64], rule: FdRule, out: &mut [f64]) {
        let mut scratch = z.to_vec();
        fd::gradient(&|v| self.objective(v), &mut scratch, rule, out);
    }

    fn eq_jacobian(&self, z: &[f64], rule: FdRule) -> SparseMatrix {
        let mut scratch = z.to_vec();
        let rows = self.n_eq();
        let d = fd::jacobian(&|v, out| self.eq(v, out), rows, &mut scratch, rule);
        SparseMatrix::from_dense(rows, self.dim(), &d)
    }

    fn ineq_jacobian(&self, z: &[f64], rule: FdRule) -> SparseMatrix {
        let mut scratch = z.to_vec();
        let rows = self.n_ineq();
        let d = fd::jacobian(&|v, out| self.ineq(v, out), rows, &mut scratch, rule);
        SparseMatrix::from_dense(rows, self.dim(), &d)
    }

    /// Lower triangle of `obj_factor * H_f + sum y_i H_ci + sum mu_j H_gj`
    /// as `(row, col, value)` triplets with `row >= col`.
    fn lagrangian_hessian(
        &self,
        z: &[f64],
        obj_factor: f64,
        y_eq: &[f64],
        y_ineq: &[f64],
    ) -> Vec<(usize, usize, f64)> {
        let mut c = vec![0.0; self.n_eq()];
        let mut g = vec![0.0; self.n_ineq()];
        let mut lag = |v: &[f64]| {
            self.eq(v, &mut c);
            self.ineq(v, &mut g);
            obj_factor * self.objective(v)
                + c.iter().zip(y_eq).map(|(a, b)| a * b).sum::<f64>()
                + g.iter().zip(y_ineq).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut scratch = z.to_vec();
        fd::hessian(&mut lag, &mut scratch, 1e-4)
    }
}

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A small problem assembled from closures.
pub struct DenseNlp {
    dim: usize,
    objective: Box<ScalarFn>,
    eq: Option<(usize, Box<VectorFn>)>,
    ineq: Option<(usize, Box<VectorFn>)>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DenseNlp {
    pub fn new(dim: usize, objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            objective: Box::new(objective),
            eq: None,
            ineq: None,
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn with_eq(mut self, count: usize, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.eq = Some((count, Box::new(f)));
        self
    }

    pub fn with_ineq(mut self, count: usize, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.ineq = Some((count, Box::new(f)));
        self
    }

    pub fn with_bounds(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), self.dim);
        assert_eq!(hi.len(), self.dim);
        self.lo = lo;
        self.hi = hi;
        self
    }
}

impl NlpProblem for DenseNlp {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_eq(&self) -> usize {
        self.eq.as_ref().map_or(0, |e| e.0)
    }

    fn n_ineq(&self) -> usize {
        self.ineq.as_ref().map_or(0, |e| e.0)
    }

    fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    fn objective(&self, z: &[f64]) -> f64 {
        (self.objective)(z)
    }

    fn eq(&self, z: &[f64], out: &mut [f64]) {
        if let Some((_, f)) = &self.eq {
            f(z, out)
        }
    }

    fn ineq(&self, z: &[f64], out: &mut [f64]) {
        if let Some((_, f)) = &self.ineq {
            f(z, out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Success,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tol_kkt: f64,
    pub tol_feas: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    /// Relative step of the forward-difference derivatives.
    pub fd_step: f64,
    /// Switch to central differences once the forward-difference gradient
    /// is nearly stationary.
    pub central_polish: bool,
    /// Record one trace row per outer iteration.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_kkt: 1e-8,
            tol_feas: 1e-8,
            max_outer: 50,
            max_inner: 2000,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            max_penalty: 1e12,
            fd_step: 1e-7,
            central_polish: true,
            trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            self.tol_kkt,
            self.tol_feas,
            self.initial_penalty,
            self.max_penalty,
            self.fd_step,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_outer == 0 || self.max_inner == 0 {
            return Err(crate::Error::InvalidConfig("solver options must be positive".into()));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(crate::Error::InvalidConfig("penalty growth must exceed 1".into()));
        }
        Ok(())
    }
}

/// One outer iteration of the augmented Lagrangian loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub feas_violation: f64,
    pub kkt_residual: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpSolution {
    pub z: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    pub status: SolveStatus,
    pub objective: f64,
    pub kkt_residual: f64,
    pub feas_violation: f64,
    pub complementarity: f64,
    /// Outer iterations.
    pub iterations: usize,
    pub inner_iterations: usize,
    /// Penalty parameter on exit, reused by warm starts.
    pub penalty: f64,
    pub trace: Vec<TraceRow>,
}

impl NlpSolution {
    /// A starting point without multipliers, for use as a warm start.
    pub fn seed(z: Vec<f64>) -> Self {
        Self {
            z,
            eq_multipliers: Vec::new(),
            ineq_multipliers: Vec::new(),
            status: SolveStatus::MaxIter,
            objective: f64::NAN,
            kkt_residual: f64::INFINITY,
            feas_violation: f64::INFINITY,
            complementarity: 0.0,
            iterations: 0,
            inner_iterations: 0,
            penalty: 0.0,
            trace: Vec::new(),
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == SolveStatus::Success
    }
}

/// Writes the iteration trace as CSV.
pub fn write_trace_csv(rows: &[TraceRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "iter,objective,feas_violation,kkt_residual")?;
    for r in rows {
        writeln!(out, "{},{:.16e},{:.16e},{:.16e}", r.iter, r.objective, r.feas_violation, r.kkt_residual)?;
    }
    Ok(())
}

/// A pluggable NLP backend.
pub trait NlpSolver {
    fn solve(&self, problem: &dyn NlpProblem, warm: Option<&NlpSolution>) -> NlpSolution;
}

/// Solves with the built-in augmented Lagrangian method.
pub fn solve(problem: &dyn NlpProblem, options: &SolverOptions, warm: Option<&NlpSolution>) -> NlpSolution {
    AugmentedLagrangian::new(*options).solve(problem, warm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
    pub passed: bool,
}

pub(crate) fn project(z: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in z.iter_mut().zip(lo).zip(hi) {
        *v = v.max(l).min(h);
    }
}

/// `|| z - P(z - grad) ||_inf`
pub(crate) fn projected_gradient_norm(z: &[f64], grad: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..z.len() {
        let p = (z[i] - grad[i]).max(lo[i]).min(hi[i]);
        m = m.max((z[i] - p).abs());
    }
    m
}

pub(crate) fn lagrangian_gradient(
    problem: &dyn NlpProblem,
    z: &[f64],
    y_eq: &[f64],
    y_ineq: &[f64],
    rule: FdRule,
) -> Vec<f64> {
    let mut grad = vec![0.0; problem.dim()];
    problem.objective_gradient(z, rule, &mut grad);
    if problem.n_eq() > 0 {
        problem.eq_jacobian(z, rule).add_transpose_mul(y_eq, &mut grad);
    }
    if problem.n_ineq() > 0 {
        problem.ineq_jacobian(z, rule).add_transpose_mul(y_ineq, &mut grad);
    }
    grad
}

/// Independent first-order optimality check with central differences.
pub fn kkt_check(problem: &dyn NlpProblem, solution: &NlpSolution, tol: f64) -> KktReport {
    let z = &solution.z;
    let (lo, hi) = problem.bounds();
    let rule = FdRule::Central(1e-6);
    let grad = lagrangian_gradient(problem, z, &solution.eq_multipliers, &solution.ineq_multipliers, rule);
    let stationarity = projected_gradient_norm(z, &grad, lo, hi);

    let mut c = vec![0.0; problem.n_eq()];
    let mut g = vec![0.0; problem.n_ineq()];
    problem.eq(z, &mut c);
    problem.ineq(z, &mut g);
    let bound_violation = z
        .iter()
        .zip(lo.iter().zip(hi))
        .fold(0.0f64, |m, (v, (l, h))| m.max(l - v).max(v - h));
    let feasibility = norm_inf(&c).max(g.iter().fold(0.0f64, |m, v| m.max(*v))).max(bound_violation);
    let complementarity = g
        .iter()
        .zip(&solution.ineq_multipliers)
        .fold(0.0f64, |m, (gi, mi)| m.max((gi * mi).abs()).max(-mi));
    KktReport {
        stationarity,
        feasibility,
        complementarity,
        passed: stationarity <= tol && feasibility <= tol && complementarity <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn projection() -> DenseNlp {
        DenseNlp::new(2, |z| (z[0] - 1.0).powi(2) + (z[1] - 2.0).powi(2))
            .with_eq(1, |z, out| out[0] = z[0] + z[1] - 1.0)
    }

    pub(crate) fn bounded() -> DenseNlp {
        DenseNlp::new(1, |z| z[0] * z[0]).with_bounds(vec![3.0], vec![f64::INFINITY])
    }

    pub(crate) fn goal_toy() -> DenseNlp {
        // z = (x, alpha)
        DenseNlp::new(2, |z| z[1])
            .with_ineq(2, |z, out| {
                out[0] = 0.5 * z[0] * z[0] - z[1];
                out[1] = 0.5 * (z[0] - 2.0).powi(2) - z[1];
            })
            .with_bounds(vec![f64::NEG_INFINITY, 0.0], vec![f64::INFINITY, f64::INFINITY])
    }

    fn opts() -> SolverOptions {
        SolverOptions { trace: true, ..SolverOptions::default() }
    }

    #[test]
    fn projection_onto_line() {
        let p = projection();
        let s = solve(&p, &opts(), None);
        assert_eq!(s.status, SolveStatus::Success);
        assert!((s.z[0] - 0.0).abs() < 1e-7 && (s.z[1] - 1.0).abs() < 1e-7, "{:?}", s.z);
        // stationarity 2(z - a) + y (1, 1) = 0 gives y = 2
        assert!((s.eq_multipliers[0] - 2.0).abs() < 1e-6);
        assert!(kkt_check(&p, &s, 1e-8).passed);
    }

    #[test]
    fn active_lower_bound() {
        let p = bounded();
        let s = solve(&p, &opts(), Some(&NlpSolution { z: vec![10.0], ..empty(1, 0, 0) }));
        assert_eq!(s.status, SolveStatus::Success);
        assert!((s.z[0] - 3.0).abs() < 1e-12);
        assert!(kkt_check(&p, &s, 1e-8).passed);
    }

    #[test]
    fn goal_attainment_toy_matches_grid_oracle() {
        // grid oracle over x for max(0.5 x^2, 0.5 (x - 2)^2)
        let (mut best_x, mut best) = (0.0, f64::INFINITY);
        for i in 0..=40_000 {
            let x = -1.0 + 4.0 * i as f64 / 40_000.0;
            let v = (0.5 * x * x).max(0.5 * (x - 2.0) * (x - 2.0));
            if v < best {
                best = v;
                best_x = x;
            }
        }
        let p = goal_toy();
        let s = solve(&p, &opts(), None);
        assert_eq!(s.status, SolveStatus::Success);
        assert!((s.z[0] - best_x).abs() < 1e-4 && (s.z[0] - 1.0).abs() < 1e-6);
        assert!((s.z[1] - best).abs() < 1e-6);
        assert!(s.ineq_multipliers.iter().all(|m| *m >= 0.0));
        assert!(kkt_check(&p, &s, 1e-8).passed);
    }

    #[test]
    fn perturbed_point_fails_stationarity() {
        let p = projection();
        let mut s = solve(&p, &opts(), None);
        s.z[0] += 1e-2;
        let r = kkt_check(&p, &s, 1e-8);
        assert!(r.stationarity > 1e-8);
        assert!(!r.passed);
    }

    #[test]
    fn unconstrained_quadratic_is_exact() {
        let p = DenseNlp::new(2, |z| (z[0] - 3.0).powi(2) + 2.0 * (z[1] + 1.0).powi(2));
        let s = solve(&p, &opts(), None);
        assert_eq!(s.status, SolveStatus::Success);
        let r = kkt_check(&p, &s, 1e-8);
        assert!(r.stationarity < 1e-9 && r.feasibility == 0.0 && r.complementarity == 0.0);
    }

    #[test]
    fn warm_start_at_solution_is_fast() {
        for p in [&projection() as &dyn NlpProblem, &bounded(), &goal_toy()] {
            let cold = solve(p, &opts(), None);
            let warm = solve(p, &opts(), Some(&cold));
            assert_eq!(warm.status, SolveStatus::Success);
            assert!(warm.iterations <= 2, "{} outer iterations", warm.iterations);
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let a = solve(&goal_toy(), &opts(), None);
        let b = solve(&goal_toy(), &opts(), None);
        assert_eq!(a, b);
    }

    #[test]
    fn feasibility_is_monotone_after_penalty_growth() {
        for p in [&projection() as &dyn NlpProblem, &bounded(), &goal_toy()] {
            let s = solve(p, &opts(), None);
            for w in s.trace.windows(2) {
                if w[1].penalty > w[0].penalty {
                    assert!(w[1].feas_violation <= w[0].feas_violation);
                }
            }
        }
    }

    #[test]
    fn infeasible_problem_is_reported() {
        let p = DenseNlp::new(1, |z| z[0] * z[0])
            .with_eq(1, |z, out| out[0] = z[0] - 5.0)
            .with_bounds(vec![-1.0], vec![1.0]);
        let s = solve(&p, &SolverOptions { max_penalty: 1e6, ..opts() }, None);
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn trace_csv_has_header() {
        let s = solve(&projection(), &opts(), None);
        let mut buf = Vec::new();
        write_trace_csv(&s.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,objective,feas_violation,kkt_residual\n"));
        assert_eq!(text.lines().count(), s.trace.len() + 1);
    }

    fn empty(dim: usize, me: usize, mi: usize) -> NlpSolution {
        NlpSolution {
            z: vec![0.0; dim],
            eq_multipliers: vec![0.0; me],
            ineq_multipliers: vec![0.0; mi],
            status: SolveStatus::MaxIter,
            objective: 0.0,
            kkt_residual: f64::INFINITY,
            feas_violation: f64::INFINITY,
            complementarity: 0.0,
            iterations: 0,
            inner_iterations: 0,
            penalty: 10.0,
            trace: Vec::new(),
        }
    }
}
