//! Optimization of a master objective over the Pareto front of a
//! bi-objective problem, parametrized by the Chebyshev weight `w`
//! (weights `(w, 1 - w)`).
//!
//! The entry point is [`optimize_over_front`]: two ideal-cost solves give
//! the boundary of the front, the essential interval `[w0, wf]` follows
//! from the utopia point, and bisection on the sign of a finite-difference
//! `F'(w)` locates the best weight.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nlp::{SolveStatus, SolverOptions};
use crate::problem::{ControlProblem, Trajectory};
use crate::scalarize::{ideal_cost, solve_scalarized, utopia_vector, ScalarizationSpec, SolveResult, Warm};
use crate::transcription::TranscriptionConfig;

/// Solution of one lower-level problem.
#[derive(Debug, Clone)]
pub struct LowerSolution {
    pub objectives: Vec<f64>,
    pub status: SolveStatus,
    /// Full control solution when the lower level is an optimal control problem.
    pub detail: Option<SolveResult>,
}

/// Anything that can produce the two ideal costs and Chebyshev solutions.
pub trait LowerLevel: Send + Sync {
    /// Minimizes objective `i` (zero-based) alone.
    fn ideal(&self, i: usize) -> Result<LowerSolution>;

    /// Chebyshev solution for weights `(w, 1 - w)`.
    fn chebyshev(&self, w: f64, utopia: [f64; 2], warm: Option<&LowerSolution>) -> Result<LowerSolution>;

    /// Weighted-sum solution for weights `(w, 1 - w)`.
    fn weighted_sum(&self, w: f64, warm: Option<&LowerSolution>) -> Result<LowerSolution> {
        let _ = (w, warm);
        Err(Error::InvalidConfig("weighted sum not supported by this lower level".into()))
    }
}

/// The control problem as a lower level.
pub struct OcpLowerLevel {
    pub problem: ControlProblem,
    pub config: TranscriptionConfig,
    pub options: SolverOptions,
    pub offsets: [f64; 2],
    /// Fallback starting trajectory, used for cold solves and retries.
    pub seed: Option<Trajectory>,
}

impl OcpLowerLevel {
    pub fn new(problem: ControlProblem, config: TranscriptionConfig, options: SolverOptions) -> Self {
        Self { problem, config, options, offsets: [0.0; 2], seed: None }
    }

    pub fn with_seed(mut self, seed: Trajectory) -> Self {
        self.seed = Some(seed);
        self
    }

    fn cold(&self) -> Warm<'_> {
        self.seed.as_ref().map_or(Warm::Cold, Warm::Trajectory)
    }

    fn run(&self, spec: &ScalarizationSpec, warm: Option<&LowerSolution>) -> Result<LowerSolution> {
        let spec = spec.clone().with_offsets(self.offsets.to_vec());
        let first = match warm.and_then(|w| w.detail.as_ref()) {
            Some(prev) => Warm::Result(prev),
            None => self.cold(),
        };
        let mut res = solve_scalarized(&self.problem, &spec, self.config, &self.options, first)?;
        if !res.is_success() && warm.is_some() {
            let retry = solve_scalarized(&self.problem, &spec, self.config, &self.options, self.cold())?;
            if retry.is_success() {
                res = retry;
            }
        }
        if !res.is_success() {
            return Err(Error::SolveFailed { weights: spec.weights.clone(), status: res.nlp_status });
        }
        Ok(LowerSolution { objectives: res.objectives.0.clone(), status: res.nlp_status, detail: Some(res) })
    }
}

impl LowerLevel for OcpLowerLevel {
    fn ideal(&self, i: usize) -> Result<LowerSolution> {
        let spec = ScalarizationSpec::single(i, self.problem.r()).with_offsets(self.offsets.to_vec());
        let res = ideal_cost(&self.problem, self.config, &self.options, i, self.cold()).or_else(|_| {
            // a goal-attainment solution near the matching end is a better start
            let w = if i == 0 { 0.999 } else { 0.001 };
            let hint = solve_scalarized(
                &self.problem,
                &ScalarizationSpec::chebyshev(w, [0.0, 0.0]).with_offsets(self.offsets.to_vec()),
                self.config,
                &self.options,
                self.cold(),
            )?;
            let r = solve_scalarized(&self.problem, &spec, self.config, &self.options, Warm::Trajectory(&hint.trajectory))?;
            if r.is_success() {
                Ok(r)
            } else {
                Err(Error::SolveFailed { weights: spec.weights.clone(), status: r.nlp_status })
            }
        })?;
        Ok(LowerSolution { objectives: res.objectives.0.clone(), status: res.nlp_status, detail: Some(res) })
    }

    fn chebyshev(&self, w: f64, utopia: [f64; 2], warm: Option<&LowerSolution>) -> Result<LowerSolution> {
        self.run(&ScalarizationSpec::chebyshev(w, utopia), warm)
    }

    fn weighted_sum(&self, w: f64, warm: Option<&LowerSolution>) -> Result<LowerSolution> {
        self.run(&ScalarizationSpec::weighted_sum(vec![w, 1.0 - w]), warm)
    }
}

pub type CustomMaster = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum MasterKind {
    /// `sum c_i phi_i^2`
    WeightedSquaredNorm(Vec<f64>),
    Custom(CustomMaster),
}

/// The decision maker's objective over the front.
#[derive(Clone)]
pub struct MasterObjective {
    pub kind: MasterKind,
    /// Report `sqrt` of the raw value alongside it.
    pub report_sqrt: bool,
}

impl fmt::Debug for MasterObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            MasterKind::WeightedSquaredNorm(c) => write!(f, "WeightedSquaredNorm({c:?}, sqrt={})", self.report_sqrt),
            MasterKind::Custom(_) => write!(f, "Custom(sqrt={})", self.report_sqrt),
        }
    }
}

impl MasterObjective {
    pub fn weighted_squared_norm(c: Vec<f64>) -> Result<Self> {
        if c.iter().any(|v| !(*v >= 0.0)) || c.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidConfig("master weights must be nonnegative and not all zero".into()));
        }
        Ok(Self { kind: MasterKind::WeightedSquaredNorm(c), report_sqrt: true })
    }

    pub fn custom(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { kind: MasterKind::Custom(Arc::new(f)), report_sqrt: false }
    }

    pub fn value(&self, phi: &[f64]) -> f64 {
        match &self.kind {
            MasterKind::WeightedSquaredNorm(c) => c.iter().zip(phi).map(|(c, p)| c * p * p).sum(),
            MasterKind::Custom(f) => f(phi),
        }
    }

    /// The value as reported: `sqrt` of the raw value when flagged.
    pub fn reported(&self, raw: f64) -> f64 {
        if self.report_sqrt {
            raw.sqrt()
        } else {
            raw
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub w: f64,
    pub objectives: [f64; 2],
    pub master_raw: f64,
    pub master_sqrt: f64,
    pub status: PointStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Success,
    MaxIter,
    Infeasible,
    Failed,
}

impl From<SolveStatus> for PointStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Success => PointStatus::Success,
            SolveStatus::MaxIter => PointStatus::MaxIter,
            SolveStatus::Infeasible => PointStatus::Infeasible,
        }
    }
}

impl fmt::Display for PointStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PointStatus::Success => "success",
            PointStatus::MaxIter => "max_iter",
            PointStatus::Infeasible => "infeasible",
            PointStatus::Failed => "failed",
        })
    }
}

/// `F(w)` with a cache keyed by `w` and nearest-weight warm starts.
pub struct FrontEvaluator<'a> {
    lower: &'a dyn LowerLevel,
    master: &'a MasterObjective,
    utopia: [f64; 2],
    cache: Mutex<BTreeMap<u64, Arc<LowerSolution>>>,
    anchors: Mutex<Vec<(f64, Arc<LowerSolution>)>>,
    solves: AtomicUsize,
}

impl<'a> FrontEvaluator<'a> {
    pub fn new(lower: &'a dyn LowerLevel, master: &'a MasterObjective, utopia: [f64; 2]) -> Self {
        Self {
            lower,
            master,
            utopia,
            cache: Mutex::new(BTreeMap::new()),
            anchors: Mutex::new(Vec::new()),
            solves: AtomicUsize::new(0),
        }
    }

    pub fn utopia(&self) -> [f64; 2] {
        self.utopia
    }

    pub fn master(&self) -> &MasterObjective {
        self.master
    }

    /// Lower-level solves issued so far, including [`Self::ideal`].
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::SeqCst)
    }

    /// Ideal solve through the counter. The result also serves as a warm
    /// start for weights near `w_hint`.
    pub fn ideal(&self, i: usize, w_hint: f64) -> Result<LowerSolution> {
        self.solves.fetch_add(1, Ordering::SeqCst);
        let s = self.lower.ideal(i)?;
        self.anchors.lock().unwrap().push((w_hint, Arc::new(s.clone())));
        Ok(s)
    }

    /// Registers a known solution as a warm start for weights near `w`.
    /// It is not cached as the solution at `w`.
    pub fn anchor(&self, w: f64, s: LowerSolution) {
        self.anchors.lock().unwrap().push((w, Arc::new(s)));
    }

    /// Cached solutions, plus anchors at weights never solved, sorted by
    /// weight.
    pub fn solved(&self) -> SolvedPoints {
        let mut out: SolvedPoints =
            self.cache.lock().unwrap().iter().map(|(k, s)| (f64::from_bits(*k), s.clone())).collect();
        for (w, s) in self.anchors.lock().unwrap().iter() {
            if self.cached(*w).is_none() {
                out.push((*w, s.clone()));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    fn key(w: f64) -> u64 {
        // all weights are nonnegative, so bit order is numeric order
        (w + 0.0).to_bits()
    }

    pub fn cached(&self, w: f64) -> Option<Arc<LowerSolution>> {
        self.cache.lock().unwrap().get(&Self::key(w)).cloned()
    }

    fn nearest(&self, w: f64) -> Option<Arc<LowerSolution>> {
        let mut best: Option<(f64, Arc<LowerSolution>)> = None;
        let mut consider = |d: f64, s: &Arc<LowerSolution>| {
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, s.clone()));
            }
        };
        for (k, s) in self.cache.lock().unwrap().iter() {
            consider((f64::from_bits(*k) - w).abs(), s);
        }
        for (aw, s) in self.anchors.lock().unwrap().iter() {
            consider((aw - w).abs(), s);
        }
        best.map(|(_, s)| s)
    }

    fn point(&self, w: f64, s: &LowerSolution) -> FrontPoint {
        let raw = self.master.value(&s.objectives);
        FrontPoint {
            w,
            objectives: [s.objectives[0], s.objectives[1]],
            master_raw: raw,
            master_sqrt: raw.sqrt(),
            status: s.status.into(),
        }
    }

    /// Solution at `w`, solving only on a cache miss.
    pub fn solution(&self, w: f64) -> Result<Arc<LowerSolution>> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidConfig(format!("weight {w} outside [0, 1]")));
        }
        if let Some(s) = self.cached(w) {
            return Ok(s);
        }
        let warm = self.nearest(w);
        self.solves.fetch_add(1, Ordering::SeqCst);
        let s = Arc::new(self.lower.chebyshev(w, self.utopia, warm.as_deref())?);
        Ok(self.cache.lock().unwrap().entry(Self::key(w)).or_insert(s).clone())
    }

    pub fn eval(&self, w: f64) -> Result<FrontPoint> {
        let s = self.solution(w)?;
        Ok(self.point(w, &s))
    }

    /// Two evaluations, concurrently when `parallel` is set. Both solves
    /// warm-start from the cache as it was before either began.
    pub fn eval_pair(&self, w1: f64, w2: f64, parallel: bool) -> Result<(FrontPoint, FrontPoint)> {
        if !parallel || self.cached(w1).is_some() || self.cached(w2).is_some() {
            return Ok((self.eval(w1)?, self.eval(w2)?));
        }
        let (warm1, warm2) = (self.nearest(w1), self.nearest(w2));
        let (r1, r2) = std::thread::scope(|sc| {
            let h = sc.spawn(|| self.lower.chebyshev(w2, self.utopia, warm2.as_deref()));
            let r1 = self.lower.chebyshev(w1, self.utopia, warm1.as_deref());
            (r1, h.join().expect("solver thread panicked"))
        });
        self.solves.fetch_add(2, Ordering::SeqCst);
        let (s1, s2) = (Arc::new(r1?), Arc::new(r2?));
        let mut cache = self.cache.lock().unwrap();
        let s1 = cache.entry(Self::key(w1)).or_insert(s1).clone();
        let s2 = cache.entry(Self::key(w2)).or_insert(s2).clone();
        drop(cache);
        Ok((self.point(w1, &s1), self.point(w2, &s2)))
    }
}

/// `[w0, wf]` from the boundary points `(phi1*, phi2_bar)` and
/// `(phi1_bar, phi2*)` of the front.
pub fn essential_interval(min_phi1: [f64; 2], min_phi2: [f64; 2], utopia: [f64; 2]) -> Result<(f64, f64)> {
    let [p1_star, p2_bar] = min_phi1;
    let [p1_bar, p2_star] = min_phi2;
    let [b1, b2] = utopia;
    if !(p1_star > b1 && p1_bar > b1 && p2_star > b2 && p2_bar > b2) {
        return Err(Error::InvalidConfig("utopia point must lie strictly below both boundary points".into()));
    }
    let w0 = (p2_star - b2) / ((p1_bar - b1) + (p2_star - b2));
    let wf = (p2_bar - b2) / ((p1_star - b1) + (p2_bar - b2));
    if !(0.0 < w0 && w0 < wf && wf < 1.0) || (wf - w0) < 1e-12 {
        return Err(Error::DegenerateFront { w0, wf });
    }
    Ok((w0, wf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdSide {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derivative {
    pub w: f64,
    pub value: f64,
    /// `F(w)`, raw master value.
    pub f: f64,
    pub side: FdSide,
}

impl Derivative {
    /// `|F'| < 1e-3 (1 + |F|)`
    pub fn is_zero(&self) -> bool {
        self.value.abs() < 1e-3 * (1.0 + self.f.abs())
    }
}

/// Forward difference on `[w0, wf - delta)`, backward otherwise.
pub fn fd_derivative(
    f: &mut dyn FnMut(f64, Option<f64>) -> Result<(f64, f64)>,
    w: f64,
    delta: f64,
    interval: (f64, f64),
) -> Result<Derivative> {
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig("delta must be positive".into()));
    }
    let (w0, wf) = interval;
    if w < w0 - 1e-15 || w > wf + 1e-15 {
        return Err(Error::InvalidConfig(format!("weight {w} outside [{w0}, {wf}]")));
    }
    if w < wf - delta {
        let (fw, fp) = f(w, Some(w + delta))?;
        Ok(Derivative { w, value: (fp - fw) / delta, f: fw, side: FdSide::Forward })
    } else {
        let (fw, fm) = f(w, Some(w - delta))?;
        Ok(Derivative { w, value: (fw - fm) / delta, f: fw, side: FdSide::Backward })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndpointCase {
    /// Opposite signs: bisect.
    I,
    /// Same sign: one endpoint is a local minimizer.
    II,
    /// At least one derivative is numerically zero.
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Start,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointVerdict {
    pub case: EndpointCase,
    /// Endpoint known to be a local minimizer, if any.
    pub minimizer: Option<Endpoint>,
}

/// Sign analysis of `F'` at the interval ends. Case III needs the probes
/// `F'(w0 + delta)` and `F'(wf - delta)`; pass them when available.
pub fn classify_endpoints(
    d0: &Derivative,
    df: &Derivative,
    probe0: Option<&Derivative>,
    probef: Option<&Derivative>,
) -> EndpointVerdict {
    if d0.is_zero() || df.is_zero() {
        let minimizer = if d0.is_zero() && probe0.is_some_and(|p| p.value > 0.0 && !p.is_zero()) {
            Some(Endpoint::Start)
        } else if df.is_zero() && probef.is_some_and(|p| p.value < 0.0 && !p.is_zero()) {
            Some(Endpoint::End)
        } else if !d0.is_zero() && d0.value > 0.0 {
            Some(Endpoint::Start)
        } else if !df.is_zero() && df.value < 0.0 {
            Some(Endpoint::End)
        } else {
            None
        };
        return EndpointVerdict { case: EndpointCase::III, minimizer };
    }
    let p = d0.value * df.value;
    if p > 0.0 {
        let minimizer = if d0.value > 0.0 { Endpoint::Start } else { Endpoint::End };
        EndpointVerdict { case: EndpointCase::II, minimizer: Some(minimizer) }
    } else if d0.value > 0.0 {
        // rising then falling: both ends are local minimizers
        let better = if d0.f <= df.f { Endpoint::Start } else { Endpoint::End };
        EndpointVerdict { case: EndpointCase::I, minimizer: Some(better) }
    } else {
        EndpointVerdict { case: EndpointCase::I, minimizer: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionOptions {
    pub delta: f64,
    pub eps: f64,
    pub k_max: usize,
    /// Utopia shift below the ideal costs; ignored when `utopia` is set.
    pub eta: Option<[f64; 2]>,
    pub utopia: Option<[f64; 2]>,
    /// Evaluate `F(w)` and `F(w +- delta)` concurrently.
    pub parallel: bool,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self { delta: 1e-3, eps: 5e-5, k_max: 30, eta: None, utopia: None, parallel: false }
    }
}

impl BisectionOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.eps > 0.0 && self.k_max > 0) {
            return Err(Error::InvalidConfig("delta and eps must be positive and k_max at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    DerivativeZero,
    IntervalTol,
    MaxIter,
    EndpointMinimizer,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub derivative: f64,
    pub master_raw: f64,
    pub objectives: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionReport {
    pub utopia: [f64; 2],
    /// `(phi1*, phi2_bar)` from minimizing the first objective.
    pub min_phi1: [f64; 2],
    /// `(phi1_bar, phi2*)` from minimizing the second objective.
    pub min_phi2: [f64; 2],
    pub essential_interval: (f64, f64),
    pub endpoint_case: EndpointCase,
    pub endpoint_derivatives: (Derivative, Derivative),
    pub iterations: Vec<IterationRecord>,
    pub w_star: f64,
    pub master_at_star: f64,
    pub master_sqrt_at_star: f64,
    pub objectives_at_star: [f64; 2],
    pub termination: Termination,
    pub message: Option<String>,
    pub solves: usize,
}

impl BisectionReport {
    pub fn write_json(&self, out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

pub const MSG_CHANGE_INTERVAL: &str = "Algorithm failed. Change the interval";
pub const MSG_MAX_ITER: &str = "Maximum number of iterations exceeded.";

/// Essential interval plus bisection on the sign of `F'`.
pub fn optimize_over_front(
    lower: &dyn LowerLevel,
    master: &MasterObjective,
    options: &BisectionOptions,
) -> Result<BisectionReport> {
    optimize_over_front_with_solutions(lower, master, options).map(|(r, _)| r)
}

/// Solutions gathered during a run, by weight. The two ideal solutions sit
/// at the interval ends they belong to.
pub type SolvedPoints = Vec<(f64, Arc<LowerSolution>)>;

/// [`optimize_over_front`] that also returns every lower-level solution it
/// computed, sorted by weight.
pub fn optimize_over_front_with_solutions(
    lower: &dyn LowerLevel,
    master: &MasterObjective,
    options: &BisectionOptions,
) -> Result<(BisectionReport, SolvedPoints)> {
    options.validate()?;
    // boundary points: ideal costs and the utopia vector
    let probe = FrontEvaluator::new(lower, master, [0.0; 2]);
    let s1 = probe.ideal(0, 1.0)?;
    let s2 = probe.ideal(1, 0.0)?;
    let min_phi1 = [s1.objectives[0], s1.objectives[1]];
    let min_phi2 = [s2.objectives[0], s2.objectives[1]];
    let ideal = [min_phi1[0], min_phi2[1]];
    let utopia = utopia_vector(&ideal, options.eta.as_ref().map(|e| &e[..]), options.utopia.as_ref().map(|u| &u[..]))?;
    let utopia = [utopia[0], utopia[1]];
    let (w0, wf) = essential_interval(min_phi1, min_phi2, utopia)?;

    let ev = FrontEvaluator::new(lower, master, utopia);
    // the ideal solutions are the front points at the interval ends
    ev.anchor(wf, s1);
    ev.anchor(w0, s2);
    let base = probe.solve_count();
    let solves = |ev: &FrontEvaluator<'_>| base + ev.solve_count();
    let (delta, parallel) = (options.delta, options.parallel);
    let mut fpair = |w: f64, other: Option<f64>| -> Result<(f64, f64)> {
        let o = other.expect("pair");
        let (a, b) = ev.eval_pair(w, o, parallel)?;
        Ok((a.master_raw, b.master_raw))
    };
    let d0 = fd_derivative(&mut fpair, w0, delta, (w0, wf))?;
    let df = fd_derivative(&mut fpair, wf, delta, (w0, wf))?;

    let mut probe0 = None;
    let mut probef = None;
    if d0.is_zero() {
        probe0 = Some(fd_derivative(&mut fpair, (w0 + delta).min(wf), delta, (w0, wf))?);
    }
    if df.is_zero() {
        probef = Some(fd_derivative(&mut fpair, (wf - delta).max(w0), delta, (w0, wf))?);
    }
    let verdict = classify_endpoints(&d0, &df, probe0.as_ref(), probef.as_ref());

    let finish = |w: f64, termination: Termination, message: Option<String>, iterations: Vec<IterationRecord>| {
        let p = ev.eval(w)?;
        let report = BisectionReport {
            utopia,
            min_phi1,
            min_phi2,
            essential_interval: (w0, wf),
            endpoint_case: verdict.case,
            endpoint_derivatives: (d0, df),
            iterations,
            w_star: w,
            master_at_star: p.master_raw,
            master_sqrt_at_star: p.master_sqrt,
            objectives_at_star: p.objectives,
            termination,
            message,
            solves: solves(&ev),
        };
        Ok((report, ev.solved()))
    };

    match (verdict.case, verdict.minimizer) {
        (_, Some(Endpoint::Start)) => return finish(w0, Termination::EndpointMinimizer, None, vec![]),
        (_, Some(Endpoint::End)) => return finish(wf, Termination::EndpointMinimizer, None, vec![]),
        (EndpointCase::I, None) => {}
        (_, None) => {
            let w = if d0.f <= df.f { w0 } else { wf };
            return finish(w, Termination::Failed, Some(MSG_CHANGE_INTERVAL.into()), vec![]);
        }
    }

    let (mut a, mut b, mut da) = (w0, wf, d0.value);
    let mut records = Vec::new();
    for k in 1..=options.k_max {
        let c = 0.5 * (a + b);
        let dc = fd_derivative(&mut fpair, c, delta, (w0, wf))?;
        let pc = ev.eval(c)?;
        records.push(IterationRecord { k, a, b, c, derivative: dc.value, master_raw: dc.f, objectives: pc.objectives });
        if dc.is_zero() {
            return finish(c, Termination::DerivativeZero, None, records);
        }
        if 0.5 * (b - a) < options.eps {
            return finish(c, Termination::IntervalTol, None, records);
        }
        if k == options.k_max {
            return finish(c, Termination::MaxIter, Some(MSG_MAX_ITER.into()), records);
        }
        if da * dc.value > 0.0 {
            a = c;
            da = dc.value;
        } else {
            b = c;
        }
    }
    unreachable!("loop returns by k_max")
}

/// Chebyshev solves over a weight grid, warm-started along the grid.
/// Failed points are kept with `PointStatus::Failed` and NaN values.
pub fn sweep_front(ev: &FrontEvaluator<'_>, grid: &[f64]) -> Vec<FrontPoint> {
    grid.iter()
        .map(|&w| {
            ev.eval(w).unwrap_or(FrontPoint {
                w,
                objectives: [f64::NAN; 2],
                master_raw: f64::NAN,
                master_sqrt: f64::NAN,
                status: PointStatus::Failed,
            })
        })
        .collect()
}

/// Weighted-sum solves over a weight grid, for comparison with Chebyshev.
pub fn sweep_weighted_sum(lower: &dyn LowerLevel, master: &MasterObjective, grid: &[f64]) -> Vec<FrontPoint> {
    let mut prev: Option<LowerSolution> = None;
    grid.iter()
        .map(|&w| match lower.weighted_sum(w, prev.as_ref()) {
            Ok(s) => {
                let raw = master.value(&s.objectives);
                let p = FrontPoint {
                    w,
                    objectives: [s.objectives[0], s.objectives[1]],
                    master_raw: raw,
                    master_sqrt: raw.sqrt(),
                    status: s.status.into(),
                };
                prev = Some(s);
                p
            }
            Err(_) => FrontPoint {
                w,
                objectives: [f64::NAN; 2],
                master_raw: f64::NAN,
                master_sqrt: f64::NAN,
                status: PointStatus::Failed,
            },
        })
        .collect()
}

/// `n` evenly spaced weights on `[lo, hi]`, both ends included.
pub fn weight_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn write_front_csv(points: &[FrontPoint], mut out: impl Write) -> Result<()> {
    writeln!(out, "w,phi1,phi2,master_raw,master_sqrt,status")?;
    for p in points {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            p.w, p.objectives[0], p.objectives[1], p.master_raw, p.master_sqrt, p.status
        )?;
    }
    Ok(())
}

/// For each point, whether no other point is better in both objectives by
/// more than `tol`.
pub fn weakly_nondominated(points: &[[f64; 2]], tol: f64) -> Vec<bool> {
    points
        .iter()
        .map(|p| !points.iter().any(|q| q[0] < p[0] - tol && q[1] < p[1] - tol))
        .collect()
}

/// Lower-left convex hull of points in objective space, sorted by `phi1`.
pub fn lower_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::new();
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull
}

/// Vertical distance of `p` above a hull from [`lower_hull`]; `None` when
/// `p` lies outside its `phi1` range.
pub fn height_above_hull(p: [f64; 2], hull: &[[f64; 2]]) -> Option<f64> {
    let i = hull.windows(2).position(|s| s[0][0] <= p[0] && p[0] <= s[1][0])?;
    let (a, b) = (hull[i], hull[i + 1]);
    let t = if b[0] > a[0] { (p[0] - a[0]) / (b[0] - a[0]) } else { 0.0 };
    Some(p[1] - (a[1] + t * (b[1] - a[1])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deriv(w: f64, value: f64, f: f64) -> Derivative {
        Derivative { w, value, f, side: FdSide::Forward }
    }

    #[test]
    fn essential_interval_examples() {
        let (w0, wf) = essential_interval([3.668, 46.50], [5.000, 44.71], [0.0, 0.0]).unwrap();
        assert!((w0 - 0.8994).abs() < 5e-5 && (wf - 0.9269).abs() < 5e-5, "{w0} {wf}");
        let (w0, wf) = essential_interval([1.0, 3.0], [3.0, 1.0], [0.0, 0.0]).unwrap();
        assert_eq!((w0, wf), (0.25, 0.75));
        let (w0, wf) = essential_interval([26459.0, 35205.0], [28155.0, 31133.0], [0.0, 0.0]).unwrap();
        assert!((w0 - 0.5251).abs() < 5e-5 && (wf - 0.5709).abs() < 5e-5, "{w0} {wf}");
        assert!(matches!(
            essential_interval([1.0, 1.0], [1.0, 1.0], [0.0, 0.0]),
            Err(Error::DegenerateFront { .. })
        ));
        assert!(essential_interval([1.0, 3.0], [3.0, 1.0], [2.0, 0.0]).is_err());
    }

    #[test]
    fn essential_interval_shift_invariance() {
        let base = essential_interval([1.0, 3.0], [2.5, 1.2], [0.5, 0.7]).unwrap();
        let (c1, c2) = (10.0, 3.5);
        let shifted = essential_interval([1.0 + c1, 3.0 + c2], [2.5 + c1, 1.2 + c2], [0.5 + c1, 0.7 + c2]).unwrap();
        assert!((base.0 - shifted.0).abs() < 1e-14 && (base.1 - shifted.1).abs() < 1e-14);
    }

    fn quad(w: f64, other: Option<f64>) -> Result<(f64, f64)> {
        Ok((w * w, other.unwrap().powi(2)))
    }

    #[test]
    fn finite_difference_rules() {
        let d = fd_derivative(&mut quad, 0.5, 1e-3, (0.0, 1.0)).unwrap();
        assert!((d.value - 1.001).abs() < 1e-12);
        assert_eq!(d.side, FdSide::Forward);
        let d = fd_derivative(&mut quad, 1.0, 1e-3, (0.0, 1.0)).unwrap();
        assert_eq!(d.side, FdSide::Backward);
        assert!((d.value - 1.999).abs() < 1e-12);
        let d = fd_derivative(&mut quad, 1.0 - 1e-3, 1e-3, (0.0, 1.0)).unwrap();
        assert_eq!(d.side, FdSide::Backward);
        let mut kink = |w: f64, o: Option<f64>| Ok(((w - 0.3).abs(), (o.unwrap() - 0.3).abs()));
        let d = fd_derivative(&mut kink, 0.3, 1e-3, (0.0, 1.0)).unwrap();
        assert!((d.value - 1.0).abs() < 1e-9);
        assert!(fd_derivative(&mut quad, 0.5, 0.0, (0.0, 1.0)).is_err());
    }

    #[test]
    fn endpoint_classification() {
        let v = classify_endpoints(&deriv(0.0, -2.0, 1.0), &deriv(1.0, 3.0, 1.0), None, None);
        assert_eq!((v.case, v.minimizer), (EndpointCase::I, None));
        let v = classify_endpoints(&deriv(0.0, 1.0, 1.0), &deriv(1.0, 1.0, 1.0), None, None);
        assert_eq!((v.case, v.minimizer), (EndpointCase::II, Some(Endpoint::Start)));
        let v = classify_endpoints(&deriv(0.0, -1.0, 1.0), &deriv(1.0, -1.0, 1.0), None, None);
        assert_eq!(v.minimizer, Some(Endpoint::End));
        // F(w) = (w - w0)^2: zero slope at w0, positive just inside
        let w0 = 0.2;
        let v = classify_endpoints(
            &deriv(w0, 0.0, 0.0),
            &deriv(1.0, 1.6, 0.64),
            Some(&deriv(w0 + 1e-3, 3e-3, 4e-6)),
            None,
        );
        assert_eq!((v.case, v.minimizer), (EndpointCase::III, Some(Endpoint::Start)));
        let v = classify_endpoints(&deriv(0.0, 0.0, 0.0), &deriv(1.0, 0.0, 0.0), None, None);
        assert_eq!((v.case, v.minimizer), (EndpointCase::III, None));
    }

    #[test]
    fn nondominance_flags() {
        let pts = [[1.0, 3.0], [2.0, 2.0], [3.0, 1.0], [2.5, 2.5]];
        assert_eq!(weakly_nondominated(&pts, 1e-9), vec![true, true, true, false]);
    }

    #[test]
    fn csv_header_and_rows() {
        let p = FrontPoint {
            w: 0.5,
            objectives: [1.0, 2.0],
            master_raw: 5.0,
            master_sqrt: 5f64.sqrt(),
            status: PointStatus::Success,
        };
        let mut buf = Vec::new();
        write_front_csv(&[p], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("w,phi1,phi2,master_raw,master_sqrt,status"));
        assert!(lines.next().unwrap().ends_with(",success"));
    }

    #[test]
    fn hull_of_a_dented_curve() {
        let pts = [[0.0, 1.0], [0.5, 0.8], [1.0, 0.0], [0.25, 0.5], [0.75, 0.4]];
        let hull = lower_hull(&pts);
        assert_eq!(hull, vec![[0.0, 1.0], [0.25, 0.5], [1.0, 0.0]]);
        let h = height_above_hull([0.75, 0.4], &hull).unwrap();
        assert!((h - (0.4 - 0.5 / 3.0)).abs() < 1e-12);
        assert_eq!(height_above_hull([1.5, 0.0], &hull), None);
    }
}
