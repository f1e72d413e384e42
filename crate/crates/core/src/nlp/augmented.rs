use super::{
    project, projected_gradient_norm, FdRule, NlpProblem, NlpSolution, NlpSolver, SolveStatus, SolverOptions,
    TraceRow,
};
use crate::linalg::{norm_inf, SkylineMatrix, SparseMatrix};

const ARMIJO: f64 = 1e-4;
const ACTIVE_EPS: f64 = 1e-3;
const SHIFT_INITIAL: f64 = 1e-4;
const SHIFT_GROWTH: f64 = 8.0;
const STALL_LIMIT: usize = 5;
const DAMP_MIN: f64 = 1e-6;
const DAMP_MAX: f64 = 1e4;
const BOX_REACH: f64 = 10.0;

/// Augmented Lagrangian method.
///
/// Each outer iteration minimizes
///
/// ```text
/// f + y^T c + rho/2 |c|^2 + 1/(2 rho) sum(max(0, mu + rho g)^2 - mu^2)
/// ```
///
/// over the box with a projected Newton method (Bertsekas), then updates
/// `y += rho c`, `mu = max(0, mu + rho g)` and grows `rho` whenever the
/// violation fails to drop by a factor of four.
#[derive(Debug, Clone, Copy, Default)]
pub struct AugmentedLagrangian {
    pub options: SolverOptions,
}

impl AugmentedLagrangian {
    pub fn new(options: SolverOptions) -> Self {
        Self { options }
    }
}

impl NlpSolver for AugmentedLagrangian {
    fn solve(&self, problem: &dyn NlpProblem, warm: Option<&NlpSolution>) -> NlpSolution {
        Run::new(problem, self.options).solve(warm)
    }
}

struct Point {
    f: f64,
    c: Vec<f64>,
    g: Vec<f64>,
}

struct Derivs {
    grad_f: Vec<f64>,
    jc: SparseMatrix,
    jg: SparseMatrix,
}

type Trial = (Vec<f64>, Point, f64);

enum Search {
    Armijo(Trial),
    /// Full step whose predicted decrease is below the merit's rounding.
    Flat(Trial),
    Failed,
}

struct InnerOutcome {
    pg: f64,
    iterations: usize,
}

struct Run<'a> {
    p: &'a dyn NlpProblem,
    opt: SolverOptions,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rule: FdRule,
    shift_last: f64,
    /// Levenberg-Marquardt term added to the reduced Hessian.
    damp: f64,
}

impl<'a> Run<'a> {
    fn new(p: &'a dyn NlpProblem, opt: SolverOptions) -> Self {
        let (lo, hi) = p.bounds();
        Self {
            p,
            opt,
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            rule: FdRule::Forward(opt.fd_step),
            shift_last: 0.0,
            damp: 0.0,
        }
    }

    fn point(&self, z: &[f64]) -> Point {
        let mut c = vec![0.0; self.p.n_eq()];
        let mut g = vec![0.0; self.p.n_ineq()];
        self.p.eq(z, &mut c);
        self.p.ineq(z, &mut g);
        Point { f: self.p.objective(z), c, g }
    }

    fn derivs(&self, z: &[f64]) -> Derivs {
        let mut grad_f = vec![0.0; z.len()];
        self.p.objective_gradient(z, self.rule, &mut grad_f);
        Derivs { grad_f, jc: self.p.eq_jacobian(z, self.rule), jg: self.p.ineq_jacobian(z, self.rule) }
    }

    fn merit(pt: &Point, y: &[f64], mu: &[f64], rho: f64) -> f64 {
        let mut v = pt.f;
        for (ci, yi) in pt.c.iter().zip(y) {
            v += yi * ci + 0.5 * rho * ci * ci;
        }
        for (gi, mi) in pt.g.iter().zip(mu) {
            let t = (mi + rho * gi).max(0.0);
            v += (t * t - mi * mi) / (2.0 * rho);
        }
        v
    }

    fn violation(pt: &Point) -> f64 {
        norm_inf(&pt.c).max(pt.g.iter().fold(0.0f64, |m, v| m.max(*v)))
    }

    fn solve(&mut self, warm: Option<&NlpSolution>) -> NlpSolution {
        let n = self.p.dim();
        let (me, mi) = (self.p.n_eq(), self.p.n_ineq());
        let mut z = match warm {
            Some(w) if w.z.len() == n => w.z.clone(),
            _ => vec![0.0; n],
        };
        for i in 0..n {
            if !z[i].is_finite() {
                z[i] = 0.0;
            }
        }
        project(&mut z, &self.lo, &self.hi);
        let mut y = match warm {
            Some(w) if w.eq_multipliers.len() == me => w.eq_multipliers.clone(),
            _ => vec![0.0; me],
        };
        let mut mu = match warm {
            Some(w) if w.ineq_multipliers.len() == mi => w.ineq_multipliers.iter().map(|m| m.max(0.0)).collect(),
            _ => vec![0.0; mi],
        };
        let mut rho = match warm {
            Some(w) if w.penalty > 0.0 && w.penalty.is_finite() => w.penalty.min(self.opt.max_penalty),
            _ => self.opt.initial_penalty,
        };

        let mut trace = Vec::new();
        let mut omega = 1e-2f64.max(0.5 * self.opt.tol_kkt);
        let mut prev_viol = f64::INFINITY;
        let mut best_viol = f64::INFINITY;
        let mut stalls = 0;
        let mut inner_total = 0;
        let mut best: Option<(f64, NlpSolution)> = None;

        for outer in 1..=self.opt.max_outer {
            let budget = self.opt.max_inner.saturating_sub(inner_total).max(1);
            let inner = self.inner(&mut z, &y, &mu, rho, omega, budget);
            inner_total += inner.iterations;

            let pt = self.point(&z);
            for (yi, ci) in y.iter_mut().zip(&pt.c) {
                *yi += rho * ci;
            }
            for (m, gi) in mu.iter_mut().zip(&pt.g) {
                *m = (*m + rho * gi).max(0.0);
            }
            let viol = Self::violation(&pt);
            // the inner gradient equals the Lagrangian gradient at the
            // updated multipliers
            let kkt = inner.pg;
            let compl = pt.g.iter().zip(&mu).fold(0.0f64, |m, (g, u)| m.max((g * u).abs()));
            trace.push(TraceRow { iter: outer, objective: pt.f, feas_violation: viol, kkt_residual: kkt, penalty: rho });

            let converged = viol <= self.opt.tol_feas && kkt <= self.opt.tol_kkt && compl <= self.opt.tol_kkt;
            let snapshot = |status| NlpSolution {
                z: z.clone(),
                eq_multipliers: y.clone(),
                ineq_multipliers: mu.clone(),
                status,
                objective: pt.f,
                kkt_residual: kkt,
                feas_violation: viol,
                complementarity: compl,
                iterations: outer,
                inner_iterations: inner_total,
                penalty: rho,
                trace: Vec::new(),
            };
            if converged {
                return self.finish(snapshot(SolveStatus::Success), trace);
            }
            let score = (viol / self.opt.tol_feas).max(kkt / self.opt.tol_kkt).max(compl / self.opt.tol_kkt);
            if best.as_ref().map_or(true, |(s, _)| score < *s) {
                best = Some((score, snapshot(SolveStatus::MaxIter)));
            }

            if rho >= self.opt.max_penalty && viol > self.opt.tol_feas && viol >= 0.99 * best_viol {
                stalls += 1;
                if stalls >= STALL_LIMIT {
                    return self.finish(snapshot(SolveStatus::Infeasible), trace);
                }
            } else {
                stalls = 0;
            }
            best_viol = best_viol.min(viol);
            if viol > self.opt.tol_feas && viol > 0.25 * prev_viol {
                rho = (rho * self.opt.penalty_growth).min(self.opt.max_penalty);
            }
            prev_viol = viol;
            omega = (omega * 0.1).min(viol).max(0.5 * self.opt.tol_kkt);
            if inner_total >= self.opt.max_inner {
                break;
            }
        }
        let (_, sol) = best.expect("at least one outer iteration");
        self.finish(sol, trace)
    }

    fn finish(&self, mut sol: NlpSolution, trace: Vec<TraceRow>) -> NlpSolution {
        if self.opt.trace {
            sol.trace = trace;
        }
        sol
    }

    fn al_gradient(&self, pt: &Point, d: &Derivs, y: &[f64], mu: &[f64], rho: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let yhat: Vec<f64> = y.iter().zip(&pt.c).map(|(yi, ci)| yi + rho * ci).collect();
        let nu: Vec<f64> = mu.iter().zip(&pt.g).map(|(m, g)| (m + rho * g).max(0.0)).collect();
        let mut grad = d.grad_f.clone();
        d.jc.add_transpose_mul(&yhat, &mut grad);
        d.jg.add_transpose_mul(&nu, &mut grad);
        (grad, yhat, nu)
    }

    /// Projected Newton minimization of the augmented Lagrangian.
    fn inner(&mut self, z: &mut Vec<f64>, y: &[f64], mu: &[f64], rho: f64, omega: f64, budget: usize) -> InnerOutcome {
        let n = z.len();
        let mut pt = self.point(z);
        let mut phi = Self::merit(&pt, y, mu, rho);
        let mut it = 0;
        let mut cached: Option<Derivs> = None;
        loop {
            let d = cached.take().unwrap_or_else(|| self.derivs(z));
            let (grad, yhat, nu) = self.al_gradient(&pt, &d, y, mu, rho);
            let pg = projected_gradient_norm(z, &grad, &self.lo, &self.hi);
            if self.opt.central_polish && matches!(self.rule, FdRule::Forward(_)) && pg < 1e-5 {
                self.rule = FdRule::Central(6e-6);
                continue;
            }
            if pg <= omega || it >= budget {
                return InnerOutcome { pg, iterations: it };
            }
            it += 1;

            let eps = ACTIVE_EPS.min(pg);
            let active: Vec<bool> = (0..n)
                .map(|i| {
                    self.lo[i] == self.hi[i]
                        || (z[i] <= self.lo[i] + eps && grad[i] > 0.0)
                        || (z[i] >= self.hi[i] - eps && grad[i] < 0.0)
                })
                .collect();

            let step = self.newton_direction(z, &grad, &yhat, &nu, &d, rho, &active);
            let mut judge = |search: Search| match search {
                Search::Armijo(t) => Some(t),
                Search::Flat(t) => {
                    // the merit cannot resolve the predicted decrease, so the
                    // step is judged by the projected gradient instead
                    let dt = self.derivs(&t.0);
                    let (gt, _, _) = self.al_gradient(&t.1, &dt, y, mu, rho);
                    if projected_gradient_norm(&t.0, &gt, &self.lo, &self.hi) < 0.9 * pg {
                        cached = Some(dt);
                        Some(t)
                    } else {
                        None
                    }
                }
                Search::Failed => None,
            };
            let newton = self.line_search(z, &step, &grad, &active, phi, y, mu, rho);
            let accepted = judge(newton).or_else(|| {
                let dir: Vec<f64> = grad.iter().map(|g| -g).collect();
                judge(self.line_search(z, &dir, &grad, &vec![false; n], phi, y, mu, rho))
            });
            match accepted {
                Some((z_new, pt_new, phi_new)) => {
                    *z = z_new;
                    pt = pt_new;
                    phi = phi_new;
                }
                None => return InnerOutcome { pg, iterations: it },
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn newton_direction(
        &mut self,
        z: &[f64],
        grad: &[f64],
        yhat: &[f64],
        nu: &[f64],
        d: &Derivs,
        rho: f64,
        active: &[bool],
    ) -> Vec<f64> {
        let n = z.len();
        let hess = self.p.lagrangian_hessian(z, 1.0, yhat, nu);
        let active_g: Vec<usize> = (0..nu.len()).filter(|&j| nu[j] > 0.0).collect();

        let mut first: Vec<usize> = (0..n).collect();
        let mut widen = |r: usize, c: usize| {
            let (r, c) = if r >= c { (r, c) } else { (c, r) };
            if !active[r] && !active[c] && c < first[r] {
                first[r] = c;
            }
        };
        for &(r, c, _) in &hess {
            widen(r, c);
        }
        let rows_of = |m: &SparseMatrix, r: usize| -> (usize, Vec<(usize, f64)>) {
            let entries: Vec<(usize, f64)> = m.row(r).filter(|(c, _)| !active[*c]).collect();
            let min = entries.iter().map(|e| e.0).min().unwrap_or(usize::MAX);
            (min, entries)
        };
        for r in 0..d.jc.rows {
            let (min, entries) = rows_of(&d.jc, r);
            for &(c, _) in &entries {
                widen(c, min);
            }
        }
        for &r in &active_g {
            let (min, entries) = rows_of(&d.jg, r);
            for &(c, _) in &entries {
                widen(c, min);
            }
        }

        let mut h = SkylineMatrix::with_first(first);
        for &(r, c, v) in &hess {
            if !active[r] && !active[c] {
                h.add(r, c, v);
            }
        }
        let add_outer = |m: &SparseMatrix, r: usize, h: &mut SkylineMatrix| {
            let entries: Vec<(usize, f64)> = m.row(r).filter(|(c, _)| !active[*c]).collect();
            for (a, &(ca, va)) in entries.iter().enumerate() {
                for &(cb, vb) in &entries[..=a] {
                    if ca == cb {
                        h.add(ca, ca, rho * va * vb);
                    } else {
                        h.add(ca, cb, rho * va * vb);
                    }
                }
            }
        };
        for r in 0..d.jc.rows {
            add_outer(&d.jc, r, &mut h);
        }
        for &r in &active_g {
            add_outer(&d.jg, r, &mut h);
        }
        let diag = h.diagonal();
        for i in 0..n {
            if active[i] {
                h.add(i, i, 1.0);
            }
        }

        let mut shift = if self.shift_last > 0.0 { (self.shift_last / 3.0).max(1e-12) } else { 0.0 };
        if shift < 1e-10 {
            shift = 0.0;
        }
        // a step many box widths long comes from a nearly singular reduced
        // Hessian, so it is damped until it fits
        self.damp = if self.damp > 4.0 * DAMP_MIN { self.damp / 4.0 } else { 0.0 };
        let mut step = vec![0.0; n];
        loop {
            let factor = loop {
                if let Some(f) = h.cholesky(shift + self.damp) {
                    break Some(f);
                }
                shift = if shift == 0.0 { SHIFT_INITIAL } else { shift * SHIFT_GROWTH };
                if shift > 1e20 {
                    break None;
                }
            };
            self.shift_last = shift;
            for i in 0..n {
                step[i] = if active[i] { 0.0 } else { -grad[i] };
            }
            if let Some(f) = factor {
                f.solve_in_place(&mut step);
            }
            let reach = (0..n)
                .filter(|&i| !active[i] && self.hi[i] > self.lo[i] && (self.hi[i] - self.lo[i]).is_finite())
                .fold(0.0f64, |m, i| m.max(step[i].abs() / (self.hi[i] - self.lo[i])));
            if reach <= BOX_REACH || self.damp >= DAMP_MAX {
                break;
            }
            self.damp = (self.damp * 10.0).clamp(DAMP_MIN, DAMP_MAX);
        }
        for i in 0..n {
            if active[i] {
                step[i] = if self.lo[i] == self.hi[i] { 0.0 } else { -grad[i] / (diag[i] + shift + self.damp).max(1e-8) };
            }
        }
        step
    }

    /// Armijo search along the projection arc `P(z + s d)`.
    #[allow(clippy::too_many_arguments)]
    fn line_search(
        &self,
        z: &[f64],
        dir: &[f64],
        grad: &[f64],
        active: &[bool],
        phi: f64,
        y: &[f64],
        mu: &[f64],
        rho: f64,
    ) -> Search {
        let n = z.len();
        let free_slope: f64 = (0..n).filter(|&i| !active[i]).map(|i| grad[i] * dir[i]).sum();
        if !(free_slope <= 0.0) {
            return Search::Failed;
        }
        let noise = 64.0 * f64::EPSILON * phi.abs().max(1.0);
        let mut s = 1.0;
        let mut trial = vec![0.0; n];
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = z[i] + s * dir[i];
            }
            project(&mut trial, &self.lo, &self.hi);
            let mut decrease = 0.0;
            for i in 0..n {
                decrease += if active[i] { grad[i] * (z[i] - trial[i]) } else { -s * grad[i] * dir[i] };
            }
            let pt = self.point(&trial);
            let val = Self::merit(&pt, y, mu, rho);
            if val.is_finite() {
                if val <= phi - ARMIJO * decrease {
                    return Search::Armijo((trial, pt, val));
                }
                if s == 1.0 && decrease <= noise && trial != z {
                    return Search::Flat((trial, pt, val));
                }
            }
            s *= 0.5;
            if s * norm_inf(dir) < 1e-16 * norm_inf(z).max(1.0) {
                break;
            }
        }
        Search::Failed
    }
}
