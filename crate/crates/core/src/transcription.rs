//! Direct transcription of a [`ControlProblem`] into an [`NlpProblem`] by
//! Euler or trapezoidal collocation on a uniform mesh.
//!
//! Decision vector, node major:
//!
//! ```text
//! z = [x_0, u_0, x_1, u_1, ..., x_N, u_N, t_f?, alpha?]
//! ```
//!
//! States are stored divided by the problem's state scale and the defect
//! rows are divided by the same scale. The objective and the attainment
//! rows are divided by the objective scale, and so is `alpha`.
//!
//! Derivatives are assembled from node-local central differences, so the
//! Jacobians and the Lagrangian Hessian come out sparse.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::nlp::{fd, FdRule, NlpProblem, NlpSolution};
use crate::problem::{simulate, ControlProblem, DelayOffsets, Horizon, NodeArgs, Trajectory};
use crate::scalarize::{ScalarizationKind, ScalarizationSpec};

const JAC_STEP: f64 = 6e-6;
const HESS_STEP: f64 = 1.2e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    Trapezoidal,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Scheme::Euler),
            "trapezoidal" | "trapezoid" | "trap" => Ok(Scheme::Trapezoidal),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranscriptionConfig {
    /// Number of mesh intervals `N`.
    pub intervals: usize,
    pub scheme: Scheme,
    /// Starting horizon when the terminal time is free.
    pub t_f_guess: f64,
}

impl TranscriptionConfig {
    pub fn new(intervals: usize, scheme: Scheme) -> Self {
        Self { intervals, scheme, t_f_guess: 1.0 }
    }

    pub fn with_t_f_guess(mut self, t: f64) -> Self {
        self.t_f_guess = t;
        self
    }
}

/// Index map of the decision vector and constraint blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct NlpLayout {
    pub n: usize,
    pub m: usize,
    pub intervals: usize,
    pub scheme: Scheme,
    pub t_f_slot: Option<usize>,
    pub alpha_slot: Option<usize>,
    pub fixed_t_f: Option<f64>,
    pub dim: usize,
    pub defect_rows: Range<usize>,
    pub boundary_eq_rows: Range<usize>,
    pub boundary_ineq_rows: Range<usize>,
    pub path_rows: Range<usize>,
    pub state_rows: Range<usize>,
    pub goal_rows: Range<usize>,
    pub state_scale: Vec<f64>,
    pub objective_scale: f64,
}

impl NlpLayout {
    pub fn state(&self, k: usize, i: usize) -> usize {
        k * (self.n + self.m) + i
    }

    pub fn control(&self, k: usize, j: usize) -> usize {
        k * (self.n + self.m) + self.n + j
    }

    pub fn n_eq(&self) -> usize {
        self.boundary_eq_rows.end
    }

    pub fn n_ineq(&self) -> usize {
        self.goal_rows.end
    }

    pub fn t_f(&self, z: &[f64]) -> f64 {
        match (self.t_f_slot, self.fixed_t_f) {
            (Some(s), _) => z[s],
            (None, Some(t)) => t,
            (None, None) => unreachable!("layout without a horizon"),
        }
    }

    /// Unscaled attainment level.
    pub fn alpha(&self, z: &[f64]) -> Option<f64> {
        self.alpha_slot.map(|s| z[s] * self.objective_scale)
    }
}

/// Transcribed problem borrowing the continuous description.
pub struct Transcription<'a> {
    problem: &'a ControlProblem,
    config: TranscriptionConfig,
    layout: NlpLayout,
    spec: Option<ScalarizationSpec>,
    offsets: DelayOffsets,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// Reusable buffers for one node evaluation.
struct NodeBuf {
    x: Vec<f64>,
    xd: Vec<f64>,
    u: Vec<f64>,
    ud: Vec<f64>,
    hist: Vec<f64>,
    f: Vec<f64>,
    x0: Vec<f64>,
    xn: Vec<f64>,
}

impl NodeBuf {
    fn new(n: usize, m: usize) -> Self {
        Self {
            x: vec![0.0; n],
            xd: vec![0.0; n],
            u: vec![0.0; m],
            ud: vec![0.0; m],
            hist: vec![0.0; m.max(n)],
            f: vec![0.0; n],
            x0: vec![0.0; n],
            xn: vec![0.0; n],
        }
    }
}

/// Builds the finite-dimensional program.
pub fn transcribe<'a>(
    problem: &'a ControlProblem,
    config: TranscriptionConfig,
    spec: Option<&ScalarizationSpec>,
) -> Result<Transcription<'a>> {
    let (n, m, big_n) = (problem.n(), problem.m(), config.intervals);
    if big_n < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 intervals, got {big_n}")));
    }
    if let Some(s) = spec {
        s.validate(problem.r())?;
    }
    let (t_f_slot, fixed_t_f, offsets) = match problem.horizon() {
        Horizon::Fixed(t) => (None, Some(t), DelayOffsets::new(problem, t / big_n as f64)?),
        Horizon::Free { max } => {
            if problem.has_delays() {
                return Err(Error::DelayWithFreeHorizon);
            }
            if !(config.t_f_guess > 0.0) {
                return Err(Error::InvalidConfig("t_f_guess must be positive".into()));
            }
            let _ = max;
            (Some((big_n + 1) * (n + m)), None, DelayOffsets::none(m))
        }
    };
    let mut dim = (big_n + 1) * (n + m) + usize::from(t_f_slot.is_some());
    let goal = matches!(spec.map(|s| &s.kind), Some(ScalarizationKind::GoalAttainment));
    let alpha_slot = goal.then(|| {
        dim += 1;
        dim - 1
    });

    let count = |c: Option<usize>| c.unwrap_or(0);
    let defect_rows = 0..big_n * n;
    let boundary_eq_rows = defect_rows.end..defect_rows.end + count(problem.boundary_eq().map(|c| c.count));
    let p2 = count(problem.boundary_ineq().map(|c| c.count));
    let p3 = count(problem.path_constraint().map(|c| c.count));
    let p4 = count(problem.state_constraint().map(|c| c.count));
    let boundary_ineq_rows = 0..p2;
    let path_rows = p2..p2 + p3 * (big_n + 1);
    let state_rows = path_rows.end..path_rows.end + p4 * (big_n + 1);
    let goal_rows = state_rows.end..state_rows.end + if goal { problem.r() } else { 0 };

    let layout = NlpLayout {
        n,
        m,
        intervals: big_n,
        scheme: config.scheme,
        t_f_slot,
        alpha_slot,
        fixed_t_f,
        dim,
        defect_rows,
        boundary_eq_rows,
        boundary_ineq_rows,
        path_rows,
        state_rows,
        goal_rows,
        state_scale: problem.state_scale().to_vec(),
        objective_scale: problem.objective_scale(),
    };

    let mut lo = vec![f64::NEG_INFINITY; dim];
    let mut hi = vec![f64::INFINITY; dim];
    for k in 0..=big_n {
        if let Some(sb) = problem.state_bounds() {
            for i in 0..n {
                let s = layout.state_scale[i];
                lo[layout.state(k, i)] = sb[i].lo / s;
                hi[layout.state(k, i)] = sb[i].hi / s;
            }
        }
        for (j, b) in problem.control_bounds().iter().enumerate() {
            lo[layout.control(k, j)] = b.lo;
            hi[layout.control(k, j)] = b.hi;
        }
    }
    if let Some(x0) = problem.initial_state() {
        for i in 0..n {
            let v = x0[i] / layout.state_scale[i];
            lo[layout.state(0, i)] = v;
            hi[layout.state(0, i)] = v;
        }
    }
    if let (Some(s), Horizon::Free { max }) = (t_f_slot, problem.horizon()) {
        lo[s] = 1e-6 * max;
        hi[s] = max;
    }
    if let Some(a) = alpha_slot {
        lo[a] = 0.0;
    }

    Ok(Transcription { problem, config, layout, spec: spec.cloned(), offsets, lo, hi })
}

impl<'a> Transcription<'a> {
    pub fn layout(&self) -> &NlpLayout {
        &self.layout
    }

    pub fn config(&self) -> &TranscriptionConfig {
        &self.config
    }

    pub fn problem(&self) -> &ControlProblem {
        self.problem
    }

    pub fn spec(&self) -> Option<&ScalarizationSpec> {
        self.spec.as_ref()
    }

    fn h(&self, z: &[f64]) -> f64 {
        self.layout.t_f(z) / self.layout.intervals as f64
    }

    fn unscale_state(&self, z: &[f64], k: usize, out: &mut [f64]) {
        for i in 0..self.layout.n {
            out[i] = z[self.layout.state(k, i)] * self.layout.state_scale[i];
        }
    }

    /// Dynamics at node `k` into `buf.f`.
    fn rates(&self, z: &[f64], k: usize, buf: &mut NodeBuf) {
        let l = &self.layout;
        let (n, m) = (l.n, l.m);
        let t_f = l.t_f(z);
        let t = k as f64 * t_f / l.intervals as f64;
        self.unscale_state(z, k, &mut buf.x);
        for j in 0..m {
            buf.u[j] = z[l.control(k, j)];
        }
        let ox = self.offsets.state;
        if ox == 0 {
            buf.xd.copy_from_slice(&buf.x);
        } else if k >= ox {
            for i in 0..n {
                buf.xd[i] = z[l.state(k - ox, i)] * l.state_scale[i];
            }
        } else {
            self.problem.state_history(t - self.problem.state_delay(), &mut buf.xd);
        }
        for j in 0..m {
            let ou = self.offsets.controls[j];
            buf.ud[j] = if ou == 0 {
                buf.u[j]
            } else if k >= ou {
                z[l.control(k - ou, j)]
            } else {
                self.problem.control_history(t - self.problem.control_delays()[j], &mut buf.hist[..m]);
                buf.hist[j]
            };
        }
        let args = NodeArgs { x: &buf.x, x_delayed: &buf.xd, u: &buf.u, u_delayed: &buf.ud, t };
        self.problem.dynamics(&args, &mut buf.f);
    }

    /// Decision variables the dynamics at node `k` depend on.
    fn node_vars(&self, k: usize) -> Vec<usize> {
        let l = &self.layout;
        let mut v: Vec<usize> = (0..l.n + l.m).map(|i| k * (l.n + l.m) + i).collect();
        let ox = self.offsets.state;
        if ox > 0 && k >= ox {
            v.extend((0..l.n).map(|i| l.state(k - ox, i)));
        }
        for j in 0..l.m {
            let ou = self.offsets.controls[j];
            if ou > 0 && k >= ou {
                v.push(l.control(k - ou, j));
            }
        }
        v.extend(l.t_f_slot);
        v
    }

    /// Variables of the terminal functions: `x_0`, `x_N` and `t_f`.
    fn endpoint_vars(&self, with_initial: bool) -> Vec<usize> {
        let l = &self.layout;
        let mut v = Vec::new();
        if with_initial {
            v.extend((0..l.n).map(|i| l.state(0, i)));
        }
        v.extend((0..l.n).map(|i| l.state(l.intervals, i)));
        v.extend(l.t_f_slot);
        v
    }

    fn path_vars(&self, k: usize) -> Vec<usize> {
        let l = &self.layout;
        let mut v: Vec<usize> = (0..l.n + l.m).map(|i| k * (l.n + l.m) + i).collect();
        v.extend(l.t_f_slot);
        v
    }

    fn all_rates(&self, z: &[f64], buf: &mut NodeBuf) -> Vec<Vec<f64>> {
        (0..=self.layout.intervals)
            .map(|k| {
                self.rates(z, k, buf);
                buf.f.clone()
            })
            .collect()
    }

    fn objective_values(&self, z: &[f64], buf: &mut NodeBuf) -> Vec<f64> {
        self.unscale_state(z, self.layout.intervals, &mut buf.xn);
        let t_f = self.layout.t_f(z);
        let offsets = self.spec.as_ref().map(|s| s.offsets.clone());
        (0..self.problem.r())
            .map(|i| self.problem.objective(i, &buf.xn, t_f) + offsets.as_ref().map_or(0.0, |o| o[i]))
            .collect()
    }

    /// Scaled objective without the `alpha` term.
    fn terminal_objective(&self, z: &[f64], buf: &mut NodeBuf) -> f64 {
        let Some(spec) = &self.spec else { return 0.0 };
        let os = self.layout.objective_scale;
        match spec.kind {
            ScalarizationKind::GoalAttainment => 0.0,
            ScalarizationKind::WeightedSum => {
                let phi = self.objective_values(z, buf);
                phi.iter().zip(&spec.weights).map(|(p, w)| p * w).sum::<f64>() / os
            }
            ScalarizationKind::SingleObjective(i) => self.objective_values(z, buf)[i] / os,
        }
    }

    fn boundary(&self, z: &[f64], which: Which, buf: &mut NodeBuf, out: &mut [f64]) {
        let l = &self.layout;
        self.unscale_state(z, 0, &mut buf.x0);
        self.unscale_state(z, l.intervals, &mut buf.xn);
        let t_f = l.t_f(z);
        let c = match which {
            Which::Eq => self.problem.boundary_eq(),
            Which::Ineq => self.problem.boundary_ineq(),
        };
        if let Some(c) = c {
            (c.func)(&buf.x0, &buf.xn, t_f, out);
        }
    }

    fn path(&self, z: &[f64], k: usize, buf: &mut NodeBuf, out: &mut [f64]) {
        let l = &self.layout;
        self.unscale_state(z, k, &mut buf.x);
        for j in 0..l.m {
            buf.u[j] = z[l.control(k, j)];
        }
        let t = k as f64 * self.h(z);
        if let Some(c) = self.problem.path_constraint() {
            (c.func)(&buf.x, &buf.u, t, out);
        }
    }

    fn state_con(&self, z: &[f64], k: usize, buf: &mut NodeBuf, out: &mut [f64]) {
        self.unscale_state(z, k, &mut buf.x);
        let t = k as f64 * self.h(z);
        if let Some(c) = self.problem.state_constraint() {
            (c.func)(&buf.x, t, out);
        }
    }

    /// Attainment rows without the `-alpha` term.
    fn goal_values(&self, z: &[f64], buf: &mut NodeBuf, out: &mut [f64]) {
        let spec = self.spec.as_ref().expect("goal rows need a scalarization");
        let beta = spec.utopia.as_ref().expect("validated");
        let phi = self.objective_values(z, buf);
        for i in 0..out.len() {
            out[i] = spec.weights[i] * (phi[i] - beta[i]) / self.layout.objective_scale;
        }
    }

    fn defect_weights(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let (n, big_n) = (self.layout.n, self.layout.intervals);
        let yk = |k: usize| &y[k * n..(k + 1) * n];
        (0..=big_n)
            .map(|j| {
                let mut q = vec![0.0; n];
                match self.config.scheme {
                    Scheme::Euler => {
                        if j < big_n {
                            q.copy_from_slice(yk(j));
                        }
                    }
                    Scheme::Trapezoidal => {
                        if j < big_n {
                            for i in 0..n {
                                q[i] += 0.5 * yk(j)[i];
                            }
                        }
                        if j > 0 {
                            for i in 0..n {
                                q[i] += 0.5 * yk(j - 1)[i];
                            }
                        }
                    }
                }
                q
            })
            .collect()
    }

    /// Default starting point: constant initial state, mid-range controls,
    /// the guessed horizon, and `alpha` at the largest attainment row.
    pub fn default_seed(&self) -> Vec<f64> {
        self.simulated_seed().unwrap_or_else(|| self.constant_seed())
    }

    /// Forward simulation under mid-range controls, when it stays finite and
    /// inside the state bounds.
    fn simulated_seed(&self) -> Option<Vec<f64>> {
        let l = &self.layout;
        self.problem.initial_state()?;
        let t_f = match self.problem.horizon() {
            Horizon::Fixed(t) => t,
            Horizon::Free { max } => self.config.t_f_guess.min(max),
        };
        let bounds = self.problem.control_bounds();
        let traj = simulate(self.problem, t_f, l.intervals, |_, u| {
            for (uj, b) in u.iter_mut().zip(bounds) {
                *uj = b.mid();
            }
        })
        .ok()?;
        let inside = traj.states.iter().all(|x| {
            x.iter().all(|v| v.is_finite())
                && self
                    .problem
                    .state_bounds()
                    .map_or(true, |sb| x.iter().zip(sb).all(|(v, b)| b.lo <= *v && *v <= b.hi))
        });
        if !inside {
            return None;
        }
        self.seed_from_trajectory(&traj).ok()
    }

    fn constant_seed(&self) -> Vec<f64> {
        let l = &self.layout;
        let mut z = vec![0.0; l.dim];
        let x0 = self.problem.initial_state().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; l.n]);
        for k in 0..=l.intervals {
            for i in 0..l.n {
                z[l.state(k, i)] = x0[i] / l.state_scale[i];
            }
            for (j, b) in self.problem.control_bounds().iter().enumerate() {
                z[l.control(k, j)] = b.mid();
            }
        }
        if let Some(s) = l.t_f_slot {
            z[s] = self.config.t_f_guess.min(self.problem.t_f_max());
        }
        self.finish_seed(&mut z);
        z
    }

    /// Seed from a trajectory, interpolated linearly in normalized time when
    /// the meshes differ.
    pub fn seed_from_trajectory(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        let l = &self.layout;
        if traj.states.first().map_or(true, |x| x.len() != l.n)
            || traj.controls.first().map_or(true, |u| u.len() != l.m)
        {
            return Err(Error::Dimension {
                what: "warm-start trajectory",
                expected: l.n + l.m,
                found: traj.states.first().map_or(0, Vec::len) + traj.controls.first().map_or(0, Vec::len),
            });
        }
        let mut z = vec![0.0; l.dim];
        let src_n = traj.intervals();
        for k in 0..=l.intervals {
            let s = k as f64 / l.intervals as f64 * src_n as f64;
            let i0 = (s.floor() as usize).min(src_n.saturating_sub(1));
            let frac = s - i0 as f64;
            let lerp = |a: f64, b: f64| a + frac * (b - a);
            for i in 0..l.n {
                let v = lerp(traj.states[i0][i], traj.states[(i0 + 1).min(src_n)][i]);
                z[l.state(k, i)] = v / l.state_scale[i];
            }
            for j in 0..l.m {
                z[l.control(k, j)] = lerp(traj.controls[i0][j], traj.controls[(i0 + 1).min(src_n)][j]);
            }
        }
        if let Some(s) = l.t_f_slot {
            z[s] = traj.t_f;
        }
        self.finish_seed(&mut z);
        Ok(z)
    }

    /// Clamps into the bounds and resets `alpha` to the largest attainment
    /// row at `z`.
    pub fn finish_seed(&self, z: &mut [f64]) {
        crate::nlp::project(z, &self.lo, &self.hi);
        if let Some(a) = self.layout.alpha_slot {
            let mut buf = NodeBuf::new(self.layout.n, self.layout.m);
            let mut rows = vec![0.0; self.layout.goal_rows.len()];
            self.goal_values(z, &mut buf, &mut rows);
            z[a] = rows.iter().fold(0.0f64, |m, v| m.max(*v));
        }
    }

    /// Local Hessian of `f` over `vars`, added to `out` with global indices.
    fn local_hessian(
        &self,
        scratch: &mut [f64],
        vars: &[usize],
        f: &mut dyn FnMut(&[f64]) -> f64,
        out: &mut Vec<(usize, usize, f64)>,
    ) {
        let saved: Vec<f64> = vars.iter().map(|&v| scratch[v]).collect();
        let mut local = saved.clone();
        let cell = std::cell::RefCell::new(&mut *scratch);
        let mut wrapped = |v: &[f64]| {
            let mut s = cell.borrow_mut();
            for (idx, &g) in vars.iter().enumerate() {
                s[g] = v[idx];
            }
            f(&s)
        };
        let h = fd::hessian(&mut wrapped, &mut local, HESS_STEP);
        drop(wrapped);
        let s = cell.into_inner();
        for (idx, &g) in vars.iter().enumerate() {
            s[g] = saved[idx];
        }
        for (a, b, v) in h {
            let (ga, gb) = (vars[a], vars[b]);
            out.push(if ga >= gb { (ga, gb, v) } else { (gb, ga, v) });
        }
    }

    /// Central-difference Jacobian of a small vector function over `vars`,
    /// row-major `rows x vars.len()`.
    fn local_jacobian(
        &self,
        scratch: &mut [f64],
        vars: &[usize],
        rows: usize,
        f: &mut dyn FnMut(&[f64], &mut [f64]),
    ) -> Vec<f64> {
        let mut jac = vec![0.0; rows * vars.len()];
        let mut fp = vec![0.0; rows];
        let mut fm = vec![0.0; rows];
        for (c, &g) in vars.iter().enumerate() {
            let v = scratch[g];
            let h = JAC_STEP * v.abs().max(1.0);
            scratch[g] = v + h;
            f(scratch, &mut fp);
            scratch[g] = v - h;
            f(scratch, &mut fm);
            scratch[g] = v;
            for r in 0..rows {
                jac[r * vars.len() + c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        jac
    }
}

#[derive(Clone, Copy)]
enum Which {
    Eq,
    Ineq,
}

impl NlpProblem for Transcription<'_> {
    fn dim(&self) -> usize {
        self.layout.dim
    }

    fn n_eq(&self) -> usize {
        self.layout.n_eq()
    }

    fn n_ineq(&self) -> usize {
        self.layout.n_ineq()
    }

    fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    fn objective(&self, z: &[f64]) -> f64 {
        if let Some(a) = self.layout.alpha_slot {
            return z[a];
        }
        let mut buf = NodeBuf::new(self.layout.n, self.layout.m);
        self.terminal_objective(z, &mut buf)
    }

    fn eq(&self, z: &[f64], out: &mut [f64]) {
        let l = &self.layout;
        let (n, big_n) = (l.n, l.intervals);
        let mut buf = NodeBuf::new(n, l.m);
        let f = self.all_rates(z, &mut buf);
        let h = self.h(z);
        for k in 0..big_n {
            for i in 0..n {
                let s = l.state_scale[i];
                let step = match self.config.scheme {
                    Scheme::Euler => h * f[k][i],
                    Scheme::Trapezoidal => 0.5 * h * (f[k][i] + f[k + 1][i]),
                };
                out[k * n + i] = z[l.state(k + 1, i)] - z[l.state(k, i)] - step / s;
            }
        }
        self.boundary(z, Which::Eq, &mut buf, &mut out[l.boundary_eq_rows.clone()]);
    }

    fn ineq(&self, z: &[f64], out: &mut [f64]) {
        let l = &self.layout;
        let mut buf = NodeBuf::new(l.n, l.m);
        self.boundary(z, Which::Ineq, &mut buf, &mut out[l.boundary_ineq_rows.clone()]);
        let p3 = self.problem.path_constraint().map_or(0, |c| c.count);
        let p4 = self.problem.state_constraint().map_or(0, |c| c.count);
        for k in 0..=l.intervals {
            if p3 > 0 {
                let r0 = l.path_rows.start + k * p3;
                self.path(z, k, &mut buf, &mut out[r0..r0 + p3]);
            }
            if p4 > 0 {
                let r0 = l.state_rows.start + k * p4;
                self.state_con(z, k, &mut buf, &mut out[r0..r0 + p4]);
            }
        }
        if let Some(a) = l.alpha_slot {
            let rows = l.goal_rows.clone();
            self.goal_values(z, &mut buf, &mut out[rows.clone()]);
            for v in &mut out[rows] {
                *v -= z[a];
            }
        }
    }

    fn objective_gradient(&self, z: &[f64], _rule: FdRule, out: &mut [f64]) {
        out.fill(0.0);
        let l = &self.layout;
        if let Some(a) = l.alpha_slot {
            out[a] = 1.0;
            return;
        }
        if self.spec.is_none() {
            return;
        }
        let mut scratch = z.to_vec();
        let mut buf = NodeBuf::new(l.n, l.m);
        let vars = self.endpoint_vars(false);
        let jac = self.local_jacobian(&mut scratch, &vars, 1, &mut |v, o| o[0] = self.terminal_objective(v, &mut buf));
        for (c, &g) in vars.iter().enumerate() {
            out[g] = jac[c];
        }
    }

    fn eq_jacobian(&self, z: &[f64], _rule: FdRule) -> SparseMatrix {
        let l = &self.layout;
        let (n, big_n) = (l.n, l.intervals);
        let mut scratch = z.to_vec();
        let mut buf = NodeBuf::new(n, l.m);
        let f = self.all_rates(z, &mut buf);
        let vars: Vec<Vec<usize>> = (0..=big_n).map(|k| self.node_vars(k)).collect();
        let jacs: Vec<Vec<f64>> = (0..=big_n)
            .map(|k| {
                self.local_jacobian(&mut scratch, &vars[k], n, &mut |v, o| {
                    self.rates(v, k, &mut buf);
                    o.copy_from_slice(&buf.f);
                })
            })
            .collect();
        let h = self.h(z);
        let inv_n = 1.0 / big_n as f64;
        let mut t = Vec::with_capacity(big_n * n * 12);
        for k in 0..big_n {
            for i in 0..n {
                let row = k * n + i;
                let s = l.state_scale[i];
                t.push((row, l.state(k + 1, i), 1.0));
                t.push((row, l.state(k, i), -1.0));
                let add_node = |node: usize, factor: f64, t: &mut Vec<(usize, usize, f64)>| {
                    let nv = vars[node].len();
                    for (c, &g) in vars[node].iter().enumerate() {
                        let v = jacs[node][i * nv + c];
                        if v != 0.0 {
                            t.push((row, g, -factor * v / s));
                        }
                    }
                };
                match self.config.scheme {
                    Scheme::Euler => {
                        add_node(k, h, &mut t);
                        if let Some(ts) = l.t_f_slot {
                            t.push((row, ts, -inv_n * f[k][i] / s));
                        }
                    }
                    Scheme::Trapezoidal => {
                        add_node(k, 0.5 * h, &mut t);
                        add_node(k + 1, 0.5 * h, &mut t);
                        if let Some(ts) = l.t_f_slot {
                            t.push((row, ts, -0.5 * inv_n * (f[k][i] + f[k + 1][i]) / s));
                        }
                    }
                }
            }
        }
        let pb = l.boundary_eq_rows.len();
        if pb > 0 {
            let bvars = self.endpoint_vars(true);
            let jac = self.local_jacobian(&mut scratch, &bvars, pb, &mut |v, o| self.boundary(v, Which::Eq, &mut buf, o));
            push_dense(&mut t, l.boundary_eq_rows.start, &bvars, pb, &jac);
        }
        SparseMatrix::from_triplets(l.n_eq(), l.dim, t)
    }

    fn ineq_jacobian(&self, z: &[f64], _rule: FdRule) -> SparseMatrix {
        let l = &self.layout;
        let mut scratch = z.to_vec();
        let mut buf = NodeBuf::new(l.n, l.m);
        let mut t = Vec::new();
        let p2 = l.boundary_ineq_rows.len();
        if p2 > 0 {
            let bvars = self.endpoint_vars(true);
            let jac =
                self.local_jacobian(&mut scratch, &bvars, p2, &mut |v, o| self.boundary(v, Which::Ineq, &mut buf, o));
            push_dense(&mut t, l.boundary_ineq_rows.start, &bvars, p2, &jac);
        }
        let p3 = self.problem.path_constraint().map_or(0, |c| c.count);
        let p4 = self.problem.state_constraint().map_or(0, |c| c.count);
        for k in 0..=l.intervals {
            let vars = self.path_vars(k);
            if p3 > 0 {
                let jac = self.local_jacobian(&mut scratch, &vars, p3, &mut |v, o| self.path(v, k, &mut buf, o));
                push_dense(&mut t, l.path_rows.start + k * p3, &vars, p3, &jac);
            }
            if p4 > 0 {
                let jac = self.local_jacobian(&mut scratch, &vars, p4, &mut |v, o| self.state_con(v, k, &mut buf, o));
                push_dense(&mut t, l.state_rows.start + k * p4, &vars, p4, &jac);
            }
        }
        if let Some(a) = l.alpha_slot {
            let r = l.goal_rows.len();
            let vars = self.endpoint_vars(false);
            let jac = self.local_jacobian(&mut scratch, &vars, r, &mut |v, o| self.goal_values(v, &mut buf, o));
            push_dense(&mut t, l.goal_rows.start, &vars, r, &jac);
            for i in 0..r {
                t.push((l.goal_rows.start + i, a, -1.0));
            }
        }
        SparseMatrix::from_triplets(l.n_ineq(), l.dim, t)
    }

    fn lagrangian_hessian(
        &self,
        z: &[f64],
        obj_factor: f64,
        y_eq: &[f64],
        y_ineq: &[f64],
    ) -> Vec<(usize, usize, f64)> {
        let l = &self.layout;
        let (n, big_n) = (l.n, l.intervals);
        let mut scratch = z.to_vec();
        let mut buf = NodeBuf::new(n, l.m);
        let mut out = Vec::new();

        let q = self.defect_weights(&y_eq[l.defect_rows.clone()]);
        for j in 0..=big_n {
            if q[j].iter().all(|v| *v == 0.0) {
                continue;
            }
            let vars = self.node_vars(j);
            let qj = &q[j];
            let mut psi = |v: &[f64]| {
                self.rates(v, j, &mut buf);
                let h = self.h(v);
                -h * (0..n).map(|i| qj[i] / l.state_scale[i] * buf.f[i]).sum::<f64>()
            };
            self.local_hessian(&mut scratch, &vars, &mut psi, &mut out);
        }

        if l.alpha_slot.is_none() && self.spec.is_some() && obj_factor != 0.0 {
            let vars = self.endpoint_vars(false);
            let mut f = |v: &[f64]| obj_factor * self.terminal_objective(v, &mut buf);
            self.local_hessian(&mut scratch, &vars, &mut f, &mut out);
        }

        let yb = &y_eq[l.boundary_eq_rows.clone()];
        if yb.iter().any(|v| *v != 0.0) {
            let vars = self.endpoint_vars(true);
            let mut vals = vec![0.0; yb.len()];
            let mut f = |v: &[f64]| {
                self.boundary(v, Which::Eq, &mut buf, &mut vals);
                vals.iter().zip(yb).map(|(a, b)| a * b).sum()
            };
            self.local_hessian(&mut scratch, &vars, &mut f, &mut out);
        }

        let mb = &y_ineq[l.boundary_ineq_rows.clone()];
        if mb.iter().any(|v| *v != 0.0) {
            let vars = self.endpoint_vars(true);
            let mut vals = vec![0.0; mb.len()];
            let mut f = |v: &[f64]| {
                self.boundary(v, Which::Ineq, &mut buf, &mut vals);
                vals.iter().zip(mb).map(|(a, b)| a * b).sum()
            };
            self.local_hessian(&mut scratch, &vars, &mut f, &mut out);
        }

        let p3 = self.problem.path_constraint().map_or(0, |c| c.count);
        let p4 = self.problem.state_constraint().map_or(0, |c| c.count);
        for k in 0..=big_n {
            let vars = self.path_vars(k);
            if p3 > 0 {
                let r0 = l.path_rows.start + k * p3;
                let mk = &y_ineq[r0..r0 + p3];
                if mk.iter().any(|v| *v != 0.0) {
                    let mut vals = vec![0.0; p3];
                    let mut f = |v: &[f64]| {
                        self.path(v, k, &mut buf, &mut vals);
                        vals.iter().zip(mk).map(|(a, b)| a * b).sum()
                    };
                    self.local_hessian(&mut scratch, &vars, &mut f, &mut out);
                }
            }
            if p4 > 0 {
                let r0 = l.state_rows.start + k * p4;
                let mk = &y_ineq[r0..r0 + p4];
                if mk.iter().any(|v| *v != 0.0) {
                    let mut vals = vec![0.0; p4];
                    let mut f = |v: &[f64]| {
                        self.state_con(v, k, &mut buf, &mut vals);
                        vals.iter().zip(mk).map(|(a, b)| a * b).sum()
                    };
                    self.local_hessian(&mut scratch, &vars, &mut f, &mut out);
                }
            }
        }

        if l.alpha_slot.is_some() {
            let mg = &y_ineq[l.goal_rows.clone()];
            if mg.iter().any(|v| *v != 0.0) {
                let vars = self.endpoint_vars(false);
                let mut vals = vec![0.0; mg.len()];
                let mut f = |v: &[f64]| {
                    self.goal_values(v, &mut buf, &mut vals);
                    vals.iter().zip(mg).map(|(a, b)| a * b).sum()
                };
                self.local_hessian(&mut scratch, &vars, &mut f, &mut out);
            }
        }
        out
    }
}

fn push_dense(t: &mut Vec<(usize, usize, f64)>, row0: usize, vars: &[usize], rows: usize, jac: &[f64]) {
    for r in 0..rows {
        for (c, &g) in vars.iter().enumerate() {
            let v = jac[r * vars.len() + c];
            if v != 0.0 {
                t.push((row0 + r, g, v));
            }
        }
    }
}

/// Reads states (unscaled) and controls from a decision vector.
pub fn extract_trajectory(solution: &NlpSolution, layout: &NlpLayout) -> Trajectory {
    trajectory_from_z(&solution.z, layout)
}

pub fn trajectory_from_z(z: &[f64], layout: &NlpLayout) -> Trajectory {
    let t_f = layout.t_f(z);
    let big_n = layout.intervals;
    Trajectory {
        times: (0..=big_n).map(|k| if k == big_n { t_f } else { k as f64 * t_f / big_n as f64 }).collect(),
        states: (0..=big_n)
            .map(|k| (0..layout.n).map(|i| z[layout.state(k, i)] * layout.state_scale[i]).collect())
            .collect(),
        controls: (0..=big_n).map(|k| (0..layout.m).map(|j| z[layout.control(k, j)]).collect()).collect(),
        t_f,
    }
}

/// Adjoint estimates from the defect multipliers, one vector per node.
///
/// The sign follows the Hamiltonian-minimizing convention and the values
/// are meaningful up to one positive overall factor. Under the trapezoidal
/// scheme interior nodes average the two neighbouring defect multipliers.
pub fn estimate_adjoints(solution: &NlpSolution, layout: &NlpLayout) -> Result<Vec<Vec<f64>>> {
    let (n, big_n) = (layout.n, layout.intervals);
    if solution.eq_multipliers.len() < layout.defect_rows.end {
        return Err(Error::MissingMultipliers);
    }
    let y = &solution.eq_multipliers;
    let os = layout.objective_scale;
    let p = |k: usize, i: usize| -y[k * n + i] * os / layout.state_scale[i];
    Ok((0..=big_n)
        .map(|j| {
            (0..n)
                .map(|i| match layout.scheme {
                    Scheme::Euler => p(j.min(big_n - 1), i),
                    Scheme::Trapezoidal => {
                        if j == 0 {
                            p(0, i)
                        } else if j == big_n {
                            p(big_n - 1, i)
                        } else {
                            0.5 * (p(j - 1, i) + p(j, i))
                        }
                    }
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::{self, SolverOptions};
    use crate::problem::Bounds;

    fn integrator(t_f: f64) -> ControlProblem {
        ControlProblem::builder("integrator", 1, 1)
            .dynamics(|a, out| out[0] = a.u[0])
            .horizon(Horizon::Fixed(t_f))
            .initial_state(vec![0.0])
            .objective(|x, _| x[0])
            .objective(|x, _| -x[0])
            .build()
            .unwrap()
    }

    #[test]
    fn constant_input_has_zero_defects() {
        for n in [2, 5, 17] {
            let p = integrator(2.0);
            let tr = transcribe(&p, TranscriptionConfig::new(n, Scheme::Trapezoidal), None).unwrap();
            let l = tr.layout().clone();
            let mut z = vec![0.0; l.dim];
            for k in 0..=n {
                z[l.state(k, 0)] = 2.0 * k as f64 / n as f64;
                z[l.control(k, 0)] = 1.0;
            }
            let mut c = vec![0.0; l.n_eq()];
            tr.eq(&z, &mut c);
            assert!(c.iter().all(|v| v.abs() < 1e-14));
            assert!((trajectory_from_z(&z, &l).final_state()[0] - 2.0).abs() < 1e-14);
        }
    }

    fn growth_error(n: usize, scheme: Scheme) -> f64 {
        let p = ControlProblem::builder("growth", 1, 1)
            .dynamics(|a, out| out[0] = a.x[0])
            .horizon(Horizon::Fixed(1.0))
            .initial_state(vec![1.0])
            .control_bounds(vec![Bounds::new(0.0, 0.0)])
            .objective(|x, _| x[0])
            .objective(|x, _| x[0])
            .build()
            .unwrap();
        let tr = transcribe(&p, TranscriptionConfig::new(n, scheme), None).unwrap();
        let s = nlp::solve(&tr, &SolverOptions::default(), Some(&NlpSolution::seed(tr.default_seed())));
        let traj = extract_trajectory(&s, tr.layout());
        (traj.final_state()[0] - std::f64::consts::E).abs()
    }

    #[test]
    fn trapezoid_is_second_order_on_growth() {
        // closed form: x(1) = e, trapezoid gives ((1 + h/2)/(1 - h/2))^N
        let (e1, e2) = (growth_error(20, Scheme::Trapezoidal), growth_error(40, Scheme::Trapezoidal));
        let exact20 = ((1.0 + 0.025) / (1.0 - 0.025f64)).powi(20) - std::f64::consts::E;
        assert!((e1 - exact20.abs()).abs() < 1e-6, "{e1} vs {exact20}");
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn euler_is_first_order_on_growth() {
        let ratio = growth_error(20, Scheme::Euler) / growth_error(40, Scheme::Euler);
        assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn delay_offsets_follow_the_step() {
        let p = ControlProblem::builder("delayed", 1, 2)
            .dynamics(|a, out| out[0] = a.x_delayed[0] + a.u_delayed[0] + a.u_delayed[1])
            .state_delay(0.1)
            .control_delays(vec![0.2, 0.2])
            .horizon(Horizon::Fixed(5.0))
            .initial_state(vec![1.0])
            .objective(|x, _| x[0])
            .objective(|x, _| x[0])
            .build()
            .unwrap();
        let tr = transcribe(&p, TranscriptionConfig::new(500, Scheme::Trapezoidal), None).unwrap();
        assert_eq!(tr.offsets.state, 10);
        assert_eq!(tr.offsets.controls, vec![20, 20]);
        assert!(matches!(
            transcribe(&p, TranscriptionConfig::new(30, Scheme::Trapezoidal), None),
            Err(Error::DelayNotAligned { .. })
        ));
        // the delayed value at node k >= 10 is exactly the stored node k - 10
        let l = tr.layout();
        let mut z = vec![0.0; l.dim];
        for k in 0..=500 {
            z[l.state(k, 0)] = k as f64;
        }
        let mut buf = NodeBuf::new(1, 2);
        for k in [10, 57, 500] {
            tr.rates(&z, k, &mut buf);
            assert_eq!(buf.f[0], (k - 10) as f64);
        }
        tr.rates(&z, 9, &mut buf);
        assert_eq!(buf.f[0], 1.0);
    }

    fn pendulum(delayed: bool) -> ControlProblem {
        let mut b = ControlProblem::builder("pendulum", 2, 1)
            .dynamics(|a, out| {
                out[0] = a.x[1] + 0.2 * a.x_delayed[0];
                out[1] = -a.x[0].sin() + a.u[0] * a.x[1] * a.u_delayed[0] + 0.1 * a.t;
            })
            .initial_state(vec![0.3, 0.0])
            .boundary_eq(1, |_x0, xf, tf, out| out[0] = xf[0] * tf - 1.0)
            .boundary_ineq(1, |x0, xf, _tf, out| out[0] = xf[1] * xf[1] - x0[0] - 2.0)
            .path_constraint(1, |x, u, _t, out| out[0] = x[0] * u[0] - 1.0)
            .state_constraint(1, |x, t, out| out[0] = x[1].powi(2) - 4.0 - t)
            .objective(|_, t| t)
            .objective(|x, _| x[0] * x[0] + x[1].powi(3))
            .control_bounds(vec![Bounds::new(-1.0, 1.0)])
            .state_scale(vec![1.0, 2.0])
            .objective_scale(3.0);
        b = if delayed {
            b.horizon(Horizon::Fixed(1.2)).state_delay(0.2).control_delays(vec![0.4])
        } else {
            b.horizon(Horizon::Free { max: 4.0 })
        };
        b.build().unwrap()
    }

    fn test_point(l: &NlpLayout) -> Vec<f64> {
        (0..l.dim).map(|i| 0.3 + 0.1 * ((i * 7) % 11) as f64 / 11.0 + 0.05 * (i as f64).sin()).collect()
    }

    fn check_derivatives(p: &ControlProblem, spec: &ScalarizationSpec, scheme: Scheme) {
        let tr = transcribe(p, TranscriptionConfig::new(6, scheme).with_t_f_guess(1.0), Some(spec)).unwrap();
        let l = tr.layout().clone();
        let mut z = test_point(&l);
        let rule = FdRule::Central(1e-6);

        let dense_eq = fd::jacobian(&|v, o| tr.eq(v, o), l.n_eq(), &mut z, rule);
        let sparse_eq = tr.eq_jacobian(&z, rule).to_dense();
        let dense_in = fd::jacobian(&|v, o| tr.ineq(v, o), l.n_ineq(), &mut z, rule);
        let sparse_in = tr.ineq_jacobian(&z, rule).to_dense();
        for (a, b) in dense_eq.iter().zip(&sparse_eq).chain(dense_in.iter().zip(&sparse_in)) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        let mut g_dense = vec![0.0; l.dim];
        fd::gradient(&|v| tr.objective(v), &mut z, rule, &mut g_dense);
        let mut g = vec![0.0; l.dim];
        tr.objective_gradient(&z, rule, &mut g);
        for (a, b) in g_dense.iter().zip(&g) {
            assert!((a - b).abs() < 1e-6);
        }

        let y: Vec<f64> = (0..l.n_eq()).map(|i| 0.5 - 0.1 * (i % 5) as f64).collect();
        let mu: Vec<f64> = (0..l.n_ineq()).map(|i| 0.2 + 0.1 * (i % 3) as f64).collect();
        let lag = |v: &[f64]| {
            let mut c = vec![0.0; l.n_eq()];
            let mut g = vec![0.0; l.n_ineq()];
            tr.eq(v, &mut c);
            tr.ineq(v, &mut g);
            0.7 * tr.objective(v) + dot(&y, &c) + dot(&mu, &g)
        };
        let mut lag_mut = lag;
        let mut reference = vec![0.0; l.dim * l.dim];
        for (i, j, v) in fd::hessian(&mut lag_mut, &mut z, 1e-4) {
            reference[i * l.dim + j] = v;
        }
        let mut ours = vec![0.0; l.dim * l.dim];
        for (i, j, v) in tr.lagrangian_hessian(&z, 0.7, &y, &mu) {
            assert!(i >= j);
            ours[i * l.dim + j] += v;
        }
        for (a, b) in reference.iter().zip(&ours) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    use crate::linalg::dot;

    #[test]
    fn structured_derivatives_match_dense_differences() {
        for scheme in [Scheme::Euler, Scheme::Trapezoidal] {
            let free = pendulum(false);
            check_derivatives(&free, &ScalarizationSpec::goal_attainment(vec![0.3, 0.7], vec![0.1, -0.2]), scheme);
            check_derivatives(&free, &ScalarizationSpec::weighted_sum(vec![0.4, 0.6]), scheme);
            let delayed = pendulum(true);
            check_derivatives(&delayed, &ScalarizationSpec::single(1, 2), scheme);
        }
    }

    #[test]
    fn trajectory_round_trip_reproduces_decision_vector() {
        let p = pendulum(false);
        let tr = transcribe(&p, TranscriptionConfig::new(8, Scheme::Trapezoidal), None).unwrap();
        let l = tr.layout().clone();
        let mut z = test_point(&l);
        tr.finish_seed(&mut z);
        let traj = trajectory_from_z(&z, &l);
        assert!(traj.is_well_formed());
        let back = tr.seed_from_trajectory(&traj).unwrap();
        for (a, b) in z.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn free_horizon_bounds_and_fixed_start() {
        let p = pendulum(false);
        let tr = transcribe(&p, TranscriptionConfig::new(4, Scheme::Euler), None).unwrap();
        let (lo, hi) = tr.bounds();
        let l = tr.layout();
        let s = l.t_f_slot.unwrap();
        assert_eq!((lo[s], hi[s]), (4e-6, 4.0));
        assert_eq!(lo[l.state(0, 1)], hi[l.state(0, 1)]);
        assert_eq!(l.n_eq(), 4 * 2 + 1);
        assert_eq!(l.n_ineq(), 1 + 5 + 5);
    }
}
