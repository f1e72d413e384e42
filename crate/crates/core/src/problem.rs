//! Continuous-time multi-objective optimal control problems.
//!
//! A [`ControlProblem`] describes delayed dynamics, boundary and path
//! constraints, bounds and `r` Mayer objectives `phi_i(x(t_f), t_f)`.
//! Lagrange-type costs are expected to be augmented as extra states by the
//! problem author. All callables operate on plain dense slices and must be
//! pure, so a problem can be shared freely between threads.

use std::fmt;

use crate::error::{Error, Result};

/// Arguments passed to the dynamics at a single time instant.
#[derive(Debug, Clone, Copy)]
pub struct NodeArgs<'a> {
    pub x: &'a [f64],
    pub x_delayed: &'a [f64],
    pub u: &'a [f64],
    pub u_delayed: &'a [f64],
    pub t: f64,
}

pub type DynamicsFn = dyn Fn(&NodeArgs<'_>, &mut [f64]) + Send + Sync;
pub type HistoryFn = dyn Fn(f64, &mut [f64]) + Send + Sync;
/// `theta(x(0), x(t_f), t_f)`.
pub type BoundaryFn = dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync;
/// `C(x, u, t) <= 0`.
pub type PathFn = dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync;
/// `S(x, t) <= 0`.
pub type StateFn = dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync;
pub type ObjectiveFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// A vector-valued constraint function together with its output size.
pub struct Constraint<F: ?Sized> {
    pub count: usize,
    pub func: Box<F>,
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn mid(&self) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => 0.5 * (self.lo + self.hi),
            (true, false) => self.lo,
            (false, true) => self.hi,
            (false, false) => 0.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Terminal time handling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Fixed(f64),
    /// Free terminal time with `0 < t_f <= max`.
    Free { max: f64 },
}

pub struct ControlProblem {
    name: String,
    n: usize,
    m: usize,
    dynamics: Box<DynamicsFn>,
    state_delay: f64,
    control_delays: Vec<f64>,
    state_history: Box<HistoryFn>,
    control_history: Box<HistoryFn>,
    boundary_eq: Option<Constraint<BoundaryFn>>,
    boundary_ineq: Option<Constraint<BoundaryFn>>,
    path: Option<Constraint<PathFn>>,
    state_constraint: Option<Constraint<StateFn>>,
    control_bounds: Vec<Bounds>,
    state_bounds: Option<Vec<Bounds>>,
    horizon: Horizon,
    objectives: Vec<Box<ObjectiveFn>>,
    initial_state: Option<Vec<f64>>,
    state_scale: Vec<f64>,
    objective_scale: f64,
}

impl fmt::Debug for ControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlProblem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("r", &self.objectives.len())
            .field("horizon", &self.horizon)
            .field("state_delay", &self.state_delay)
            .field("control_delays", &self.control_delays)
            .finish_non_exhaustive()
    }
}

impl ControlProblem {
    pub fn builder(name: impl Into<String>, n: usize, m: usize) -> ControlProblemBuilder {
        ControlProblemBuilder::new(name.into(), n, m)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Control dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of objectives.
    pub fn r(&self) -> usize {
        self.objectives.len()
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn state_delay(&self) -> f64 {
        self.state_delay
    }

    pub fn control_delays(&self) -> &[f64] {
        &self.control_delays
    }

    pub fn has_delays(&self) -> bool {
        self.state_delay > 0.0 || self.control_delays.iter().any(|&d| d > 0.0)
    }

    pub fn control_bounds(&self) -> &[Bounds] {
        &self.control_bounds
    }

    pub fn state_bounds(&self) -> Option<&[Bounds]> {
        self.state_bounds.as_deref()
    }

    pub fn initial_state(&self) -> Option<&[f64]> {
        self.initial_state.as_deref()
    }

    /// Typical magnitude of each state, used to scale decision variables.
    pub fn state_scale(&self) -> &[f64] {
        &self.state_scale
    }

    /// Typical magnitude of the objectives, used to scale the scalarized cost.
    pub fn objective_scale(&self) -> f64 {
        self.objective_scale
    }

    pub fn boundary_eq(&self) -> Option<&Constraint<BoundaryFn>> {
        self.boundary_eq.as_ref()
    }

    pub fn boundary_ineq(&self) -> Option<&Constraint<BoundaryFn>> {
        self.boundary_ineq.as_ref()
    }

    pub fn path_constraint(&self) -> Option<&Constraint<PathFn>> {
        self.path.as_ref()
    }

    pub fn state_constraint(&self) -> Option<&Constraint<StateFn>> {
        self.state_constraint.as_ref()
    }

    pub fn dynamics(&self, args: &NodeArgs<'_>, out: &mut [f64]) {
        (self.dynamics)(args, out)
    }

    pub fn state_history(&self, t: f64, out: &mut [f64]) {
        (self.state_history)(t, out)
    }

    pub fn control_history(&self, t: f64, out: &mut [f64]) {
        (self.control_history)(t, out)
    }

    /// Value of objective `i` (zero based).
    pub fn objective(&self, i: usize, x_final: &[f64], t_f: f64) -> f64 {
        (self.objectives[i])(x_final, t_f)
    }

    /// Upper limit on the terminal time.
    pub fn t_f_max(&self) -> f64 {
        match self.horizon {
            Horizon::Fixed(t) => t,
            Horizon::Free { max } => max,
        }
    }
}

pub struct ControlProblemBuilder {
    name: String,
    n: usize,
    m: usize,
    dynamics: Option<Box<DynamicsFn>>,
    state_delay: f64,
    control_delays: Vec<f64>,
    state_history: Option<Box<HistoryFn>>,
    control_history: Option<Box<HistoryFn>>,
    boundary_eq: Option<Constraint<BoundaryFn>>,
    boundary_ineq: Option<Constraint<BoundaryFn>>,
    path: Option<Constraint<PathFn>>,
    state_constraint: Option<Constraint<StateFn>>,
    control_bounds: Vec<Bounds>,
    state_bounds: Option<Vec<Bounds>>,
    horizon: Option<Horizon>,
    objectives: Vec<Box<ObjectiveFn>>,
    initial_state: Option<Vec<f64>>,
    state_scale: Option<Vec<f64>>,
    objective_scale: f64,
}

impl ControlProblemBuilder {
    fn new(name: String, n: usize, m: usize) -> Self {
        Self {
            name,
            n,
            m,
            dynamics: None,
            state_delay: 0.0,
            control_delays: vec![0.0; m],
            state_history: None,
            control_history: None,
            boundary_eq: None,
            boundary_ineq: None,
            path: None,
            state_constraint: None,
            control_bounds: vec![Bounds::new(f64::NEG_INFINITY, f64::INFINITY); m],
            state_bounds: None,
            horizon: None,
            objectives: Vec::new(),
            initial_state: None,
            state_scale: None,
            objective_scale: 1.0,
        }
    }

    pub fn dynamics(mut self, f: impl Fn(&NodeArgs<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.dynamics = Some(Box::new(f));
        self
    }

    pub fn state_delay(mut self, d: f64) -> Self {
        self.state_delay = d;
        self
    }

    pub fn control_delays(mut self, d: Vec<f64>) -> Self {
        self.control_delays = d;
        self
    }

    pub fn state_history(mut self, f: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.state_history = Some(Box::new(f));
        self
    }

    pub fn control_history(mut self, f: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.control_history = Some(Box::new(f));
        self
    }

    pub fn boundary_eq(
        mut self,
        count: usize,
        f: impl Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.boundary_eq = Some(Constraint { count, func: Box::new(f) });
        self
    }

    pub fn boundary_ineq(
        mut self,
        count: usize,
        f: impl Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.boundary_ineq = Some(Constraint { count, func: Box::new(f) });
        self
    }

    pub fn path_constraint(
        mut self,
        count: usize,
        f: impl Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.path = Some(Constraint { count, func: Box::new(f) });
        self
    }

    pub fn state_constraint(
        mut self,
        count: usize,
        f: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.state_constraint = Some(Constraint { count, func: Box::new(f) });
        self
    }

    pub fn control_bounds(mut self, b: Vec<Bounds>) -> Self {
        self.control_bounds = b;
        self
    }

    pub fn state_bounds(mut self, b: Vec<Bounds>) -> Self {
        self.state_bounds = Some(b);
        self
    }

    pub fn horizon(mut self, h: Horizon) -> Self {
        self.horizon = Some(h);
        self
    }

    pub fn objective(mut self, f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        self.objectives.push(Box::new(f));
        self
    }

    pub fn initial_state(mut self, x0: Vec<f64>) -> Self {
        self.initial_state = Some(x0);
        self
    }

    pub fn state_scale(mut self, s: Vec<f64>) -> Self {
        self.state_scale = Some(s);
        self
    }

    pub fn objective_scale(mut self, s: f64) -> Self {
        self.objective_scale = s;
        self
    }

    pub fn build(self) -> Result<ControlProblem> {
        let invalid = |msg: String| Err(Error::InvalidProblem(msg));
        let Self { n, m, .. } = self;
        if n == 0 {
            return invalid("state dimension must be positive".into());
        }
        let Some(dynamics) = self.dynamics else {
            return invalid("dynamics not set".into());
        };
        let Some(horizon) = self.horizon else {
            return invalid("horizon not set".into());
        };
        if self.objectives.len() < 2 {
            return invalid(format!("need at least 2 objectives, got {}", self.objectives.len()));
        }
        match horizon {
            Horizon::Fixed(t) if !(t.is_finite() && t > 0.0) => {
                return invalid(format!("fixed horizon must be positive, got {t}"))
            }
            Horizon::Free { max } if !(max.is_finite() && max > 0.0) => {
                return invalid(format!("free horizon needs a finite positive t_f_max, got {max}"))
            }
            _ => {}
        }
        if self.control_delays.len() != m {
            return invalid(format!("expected {m} control delays, got {}", self.control_delays.len()));
        }
        let delays_ok = self.state_delay >= 0.0 && self.control_delays.iter().all(|&d| d >= 0.0);
        if !delays_ok {
            return invalid("delays must be nonnegative".into());
        }
        let delayed = self.state_delay > 0.0 || self.control_delays.iter().any(|&d| d > 0.0);
        if delayed && matches!(horizon, Horizon::Free { .. }) {
            return Err(Error::DelayWithFreeHorizon);
        }
        if self.control_bounds.len() != m {
            return invalid(format!("expected {m} control bounds, got {}", self.control_bounds.len()));
        }
        if let Some(b) = self.control_bounds.iter().find(|b| !(b.lo <= b.hi)) {
            return invalid(format!("control bounds with lo > hi: [{}, {}]", b.lo, b.hi));
        }
        if let Some(sb) = &self.state_bounds {
            if sb.len() != n {
                return invalid(format!("expected {n} state bounds, got {}", sb.len()));
            }
            if sb.iter().any(|b| !(b.lo <= b.hi)) {
                return invalid("state bounds with lo > hi".into());
            }
        }
        if let Some(x0) = &self.initial_state {
            if x0.len() != n {
                return invalid(format!("initial state has length {}, expected {n}", x0.len()));
            }
        }
        let state_scale = self.state_scale.unwrap_or_else(|| vec![1.0; n]);
        if state_scale.len() != n || state_scale.iter().any(|&s| !(s > 0.0)) {
            return invalid("state scale must have n positive entries".into());
        }
        if !(self.objective_scale > 0.0) {
            return invalid("objective scale must be positive".into());
        }

        let state_history: Box<HistoryFn> = match (self.state_history, &self.initial_state) {
            (Some(h), _) => h,
            (None, Some(x0)) => {
                let x0 = x0.clone();
                Box::new(move |_t, out: &mut [f64]| out.copy_from_slice(&x0))
            }
            (None, None) if self.state_delay > 0.0 => {
                return invalid("state delay requires a state history or an initial state".into())
            }
            (None, None) => Box::new(|_t, out: &mut [f64]| out.fill(0.0)),
        };
        let control_history = self
            .control_history
            .unwrap_or_else(|| Box::new(|_t, out: &mut [f64]| out.fill(0.0)));

        Ok(ControlProblem {
            name: self.name,
            n,
            m,
            dynamics,
            state_delay: self.state_delay,
            control_delays: self.control_delays,
            state_history,
            control_history,
            boundary_eq: self.boundary_eq,
            boundary_ineq: self.boundary_ineq,
            path: self.path,
            state_constraint: self.state_constraint,
            control_bounds: self.control_bounds,
            state_bounds: self.state_bounds,
            horizon,
            objectives: self.objectives,
            initial_state: self.initial_state,
            state_scale,
            objective_scale: self.objective_scale,
        })
    }
}

/// Integer node offsets of the state and control delays on a uniform mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayOffsets {
    pub state: usize,
    pub controls: Vec<usize>,
}

impl DelayOffsets {
    /// Offsets for step `h`. Each delay must be an integer multiple of `h`.
    pub fn new(problem: &ControlProblem, h: f64) -> Result<Self> {
        let offset = |d: f64| -> Result<usize> {
            if d == 0.0 {
                return Ok(0);
            }
            let ratio = d / h;
            let k = ratio.round();
            if (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
                return Err(Error::DelayNotAligned { delay: d, step: h });
            }
            Ok(k as usize)
        };
        Ok(Self {
            state: offset(problem.state_delay)?,
            controls: problem.control_delays.iter().map(|&d| offset(d)).collect::<Result<_>>()?,
        })
    }

    pub fn none(m: usize) -> Self {
        Self { state: 0, controls: vec![0; m] }
    }
}

/// A discrete trajectory on a uniform grid `t_k = k t_f / N`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub t_f: f64,
}

impl Trajectory {
    pub fn intervals(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn step(&self) -> f64 {
        self.t_f / self.intervals() as f64
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Checks the grid invariants: strictly increasing, starting at 0 and
    /// ending at `t_f`.
    pub fn is_well_formed(&self) -> bool {
        let n = self.times.len();
        n >= 2
            && self.states.len() == n
            && self.controls.len() == n
            && self.times[0] == 0.0
            && (self.times[n - 1] - self.t_f).abs() <= 1e-12 * self.t_f.abs().max(1.0)
            && self.times.windows(2).all(|w| w[1] > w[0])
    }

    /// Control channel `j` as a column.
    pub fn control_column(&self, j: usize) -> Vec<f64> {
        self.controls.iter().map(|u| u[j]).collect()
    }

    /// State component `i` as a column.
    pub fn state_column(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[i]).collect()
    }
}

/// Objective values `(phi_1, ..., phi_r)` at a terminal point.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObjectiveVector(pub Vec<f64>);

impl ObjectiveVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for ObjectiveVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Evaluates the dynamics at node `k` of `traj`, taking delayed arguments
/// from the trajectory or, before time zero, from the history functions.
pub fn eval_dynamics(problem: &ControlProblem, traj: &Trajectory, k: usize) -> Result<Vec<f64>> {
    let (n, m) = (problem.n, problem.m);
    let big_n = traj.intervals();
    if k > big_n {
        return Err(Error::InvalidConfig(format!("node {k} out of range 0..={big_n}")));
    }
    let h = traj.step();
    let offsets = DelayOffsets::new(problem, h)?;
    let t = traj.times[k];
    let mut xd = vec![0.0; n];
    if k >= offsets.state {
        xd.copy_from_slice(&traj.states[k - offsets.state]);
    } else {
        problem.state_history(t - problem.state_delay, &mut xd);
    }
    let mut ud = vec![0.0; m];
    let mut hist = vec![0.0; m];
    for j in 0..m {
        let off = offsets.controls[j];
        ud[j] = if k >= off {
            traj.controls[k - off][j]
        } else {
            problem.control_history(t - problem.control_delays[j], &mut hist);
            hist[j]
        };
    }
    let args = NodeArgs { x: &traj.states[k], x_delayed: &xd, u: &traj.controls[k], u_delayed: &ud, t };
    let mut out = vec![0.0; n];
    problem.dynamics(&args, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDynamics { node: k });
    }
    Ok(out)
}

/// Evaluates `(phi_1, ..., phi_r)` at the end of `traj`.
pub fn eval_objectives(problem: &ControlProblem, traj: &Trajectory) -> Result<ObjectiveVector> {
    let xf = traj.final_state();
    let values = (0..problem.r())
        .map(|i| {
            let v = problem.objective(i, xf, traj.t_f);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteObjective { index: i })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ObjectiveVector(values))
}

/// Integrates the dynamics forward with Heun's method on a uniform grid of
/// `intervals` steps, with the control given as a function of time.
///
/// Delayed values are read from earlier grid nodes, so every delay must be
/// an integer multiple of the step.
pub fn simulate(
    problem: &ControlProblem,
    t_f: f64,
    intervals: usize,
    control: impl Fn(f64, &mut [f64]),
) -> Result<Trajectory> {
    let (n, m) = (problem.n, problem.m);
    let Some(x0) = problem.initial_state.as_ref() else {
        return Err(Error::InvalidProblem("simulation needs a fixed initial state".into()));
    };
    let h = t_f / intervals as f64;
    let offsets = DelayOffsets::new(problem, h)?;
    let times: Vec<f64> = (0..=intervals).map(|k| k as f64 * h).collect();
    let controls: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| {
            let mut u = vec![0.0; m];
            control(t, &mut u);
            u
        })
        .collect();
    let mut traj = Trajectory { times, states: vec![vec![0.0; n]; intervals + 1], controls, t_f };
    traj.states[0].copy_from_slice(x0);

    let mut xd = vec![0.0; n];
    let mut ud = vec![0.0; m];
    let mut hist = vec![0.0; m];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut rates = |traj: &Trajectory, x: &[f64], k: usize, out: &mut [f64]| {
        let t = traj.times[k];
        if k >= offsets.state && offsets.state > 0 {
            xd.copy_from_slice(&traj.states[k - offsets.state]);
        } else if offsets.state == 0 {
            xd.copy_from_slice(x);
        } else {
            problem.state_history(t - problem.state_delay, &mut xd);
        }
        for j in 0..m {
            let off = offsets.controls[j];
            ud[j] = if k >= off {
                traj.controls[k - off][j]
            } else {
                problem.control_history(t - problem.control_delays[j], &mut hist);
                hist[j]
            };
        }
        let args = NodeArgs { x, x_delayed: &xd, u: &traj.controls[k], u_delayed: &ud, t };
        problem.dynamics(&args, out);
    };
    for k in 0..intervals {
        let xk = traj.states[k].clone();
        rates(&traj, &xk, k, &mut k1);
        let pred: Vec<f64> = xk.iter().zip(&k1).map(|(x, f)| x + h * f).collect();
        // the predictor is visible to delayed lookups with zero offset only
        traj.states[k + 1].copy_from_slice(&pred);
        rates(&traj, &pred, k + 1, &mut k2);
        for i in 0..n {
            traj.states[k + 1][i] = xk[i] + 0.5 * h * (k1[i] + k2[i]);
        }
        if traj.states[k + 1].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteDynamics { node: k + 1 });
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrator(delay: f64) -> ControlProblem {
        ControlProblem::builder("integrator", 1, 1)
            .dynamics(|a, out| out[0] = a.u[0] + a.x_delayed[0] * 0.0)
            .control_delays(vec![delay])
            .horizon(Horizon::Fixed(2.0))
            .initial_state(vec![0.0])
            .objective(|x, _| x[0])
            .objective(|x, _| x[0])
            .build()
            .unwrap()
    }

    fn traj_const(x: f64, u: f64, n: usize, t_f: f64) -> Trajectory {
        Trajectory {
            times: (0..=n).map(|k| k as f64 * t_f / n as f64).collect(),
            states: vec![vec![x]; n + 1],
            controls: vec![vec![u]; n + 1],
            t_f,
        }
    }

    #[test]
    fn zero_input_gives_zero_rate() {
        let p = integrator(0.0);
        let traj = traj_const(3.0, 0.0, 4, 2.0);
        for k in 0..=4 {
            assert_eq!(eval_dynamics(&p, &traj, k).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn identity_objectives() {
        let p = integrator(0.0);
        let traj = traj_const(1.0, 0.0, 4, 2.0);
        let phi = eval_objectives(&p, &traj).unwrap();
        assert_eq!(phi.values(), &[1.0, 1.0]);
        // pure function of the terminal point
        assert_eq!(phi, eval_objectives(&p, &traj).unwrap());
    }

    #[test]
    fn delayed_control_reads_history_before_zero() {
        let p = ControlProblem::builder("delayed", 1, 1)
            .dynamics(|a, out| out[0] = a.u_delayed[0])
            .control_delays(vec![0.5])
            .control_history(|_t, out| out[0] = -7.0)
            .horizon(Horizon::Fixed(2.0))
            .initial_state(vec![0.0])
            .objective(|x, _| x[0])
            .objective(|_, t| t)
            .build()
            .unwrap();
        let mut traj = traj_const(0.0, 0.0, 8, 2.0);
        for (k, u) in traj.controls.iter_mut().enumerate() {
            u[0] = k as f64;
        }
        // h = 0.25, offset 2 nodes
        assert_eq!(eval_dynamics(&p, &traj, 0).unwrap(), vec![-7.0]);
        assert_eq!(eval_dynamics(&p, &traj, 1).unwrap(), vec![-7.0]);
        assert_eq!(eval_dynamics(&p, &traj, 2).unwrap(), vec![0.0]);
        assert_eq!(eval_dynamics(&p, &traj, 7).unwrap(), vec![5.0]);
    }

    #[test]
    fn misaligned_delay_is_rejected() {
        let p = integrator(0.3);
        let traj = traj_const(0.0, 0.0, 4, 2.0);
        assert!(matches!(eval_dynamics(&p, &traj, 1), Err(Error::DelayNotAligned { .. })));
    }

    #[test]
    fn non_finite_dynamics_reports_node() {
        let p = ControlProblem::builder("bad", 1, 1)
            .dynamics(|a, out| out[0] = 1.0 / a.x[0])
            .horizon(Horizon::Fixed(1.0))
            .objective(|x, _| x[0])
            .objective(|x, _| x[0])
            .build()
            .unwrap();
        let mut traj = traj_const(1.0, 0.0, 4, 1.0);
        traj.states[3][0] = 0.0;
        assert!(eval_dynamics(&p, &traj, 2).is_ok());
        assert!(matches!(eval_dynamics(&p, &traj, 3), Err(Error::NonFiniteDynamics { node: 3 })));
    }

    #[test]
    fn builder_rejects_invalid_problems() {
        let base = || {
            ControlProblem::builder("p", 1, 1)
                .dynamics(|a, out| out[0] = a.u[0])
                .objective(|x, _| x[0])
        };
        // single objective
        assert!(base().horizon(Horizon::Fixed(1.0)).build().is_err());
        let two = || base().objective(|_, t| t);
        assert!(two().horizon(Horizon::Free { max: f64::INFINITY }).build().is_err());
        assert!(two()
            .horizon(Horizon::Fixed(1.0))
            .control_bounds(vec![Bounds::new(1.0, -1.0)])
            .build()
            .is_err());
        assert!(matches!(
            two().horizon(Horizon::Free { max: 5.0 }).control_delays(vec![0.1]).build(),
            Err(Error::DelayWithFreeHorizon)
        ));
        assert!(two().horizon(Horizon::Fixed(1.0)).control_delays(vec![-0.1]).build().is_err());
        assert!(two().horizon(Horizon::Free { max: 5.0 }).build().is_ok());
    }

    #[test]
    fn heun_simulation_is_exact_for_linear_growth() {
        let p = integrator(0.0);
        let traj = simulate(&p, 2.0, 10, |_, u| u[0] = 1.0).unwrap();
        assert!(traj.is_well_formed());
        assert!((traj.final_state()[0] - 2.0).abs() < 1e-14);
    }
}
