//! Single-objective scalarizations of a multi-objective control problem:
//! ideal costs, Chebyshev goal attainment and the weighted sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nlp::{self, NlpSolution, SolveStatus, SolverOptions};
use crate::problem::{ControlProblem, ObjectiveVector, Trajectory};
use crate::transcription::{estimate_adjoints, extract_trajectory, transcribe, TranscriptionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalarizationKind {
    /// Minimize `alpha` subject to `w_i (phi_i - beta_i) <= alpha`.
    GoalAttainment,
    /// Minimize `sum w_i phi_i`.
    WeightedSum,
    /// Minimize `phi_i` alone (zero-based index).
    SingleObjective(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarizationSpec {
    pub kind: ScalarizationKind,
    pub weights: Vec<f64>,
    pub utopia: Option<Vec<f64>>,
    /// Added to each objective before it enters the scalarization.
    pub offsets: Vec<f64>,
}

impl ScalarizationSpec {
    pub fn goal_attainment(weights: Vec<f64>, utopia: Vec<f64>) -> Self {
        let r = weights.len();
        Self { kind: ScalarizationKind::GoalAttainment, weights, utopia: Some(utopia), offsets: vec![0.0; r] }
    }

    /// Bi-objective goal attainment with weights `(w, 1 - w)`.
    pub fn chebyshev(w: f64, utopia: [f64; 2]) -> Self {
        Self::goal_attainment(vec![w, 1.0 - w], utopia.to_vec())
    }

    pub fn weighted_sum(weights: Vec<f64>) -> Self {
        let r = weights.len();
        Self { kind: ScalarizationKind::WeightedSum, weights, utopia: None, offsets: vec![0.0; r] }
    }

    pub fn single(i: usize, r: usize) -> Self {
        let mut weights = vec![0.0; r];
        if i < r {
            weights[i] = 1.0;
        }
        Self { kind: ScalarizationKind::SingleObjective(i), weights, utopia: None, offsets: vec![0.0; r] }
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Self {
        self.offsets = offsets;
        self
    }

    pub fn validate(&self, r: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.weights.len() != r || self.offsets.len() != r {
            return bad(format!("scalarization needs {r} weights and offsets"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return bad("weights must be nonnegative".into());
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return bad(format!("weights sum to {sum}, not 1"));
        }
        if self.offsets.iter().any(|o| !o.is_finite()) {
            return bad("offsets must be finite".into());
        }
        match self.kind {
            ScalarizationKind::GoalAttainment => match &self.utopia {
                Some(u) if u.len() == r && u.iter().all(|v| v.is_finite()) => Ok(()),
                _ => bad(format!("goal attainment needs a finite utopia vector of length {r}")),
            },
            ScalarizationKind::SingleObjective(i) if i >= r => bad(format!("objective index {i} out of range")),
            _ => Ok(()),
        }
    }
}

/// Outcome of one scalarized solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub w_used: Vec<f64>,
    pub kind: ScalarizationKind,
    /// Objective values including any offsets.
    pub objectives: ObjectiveVector,
    pub alpha: Option<f64>,
    pub trajectory: Trajectory,
    /// One vector per mesh node, empty when multipliers were unavailable.
    pub adjoints: Vec<Vec<f64>>,
    pub nlp_status: SolveStatus,
    pub kkt_residual: f64,
    pub feas_violation: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub nlp: NlpSolution,
    #[serde(skip)]
    pub config: Option<TranscriptionConfig>,
}

impl SolveResult {
    pub fn is_success(&self) -> bool {
        self.nlp_status == SolveStatus::Success
    }

    /// Largest attainment row `w_i (phi_i - beta_i)`.
    pub fn attainment(&self, utopia: &[f64]) -> f64 {
        self.w_used
            .iter()
            .zip(self.objectives.values())
            .zip(utopia)
            .map(|((w, p), b)| w * (p - b))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Starting point for a solve.
#[derive(Debug, Clone, Copy, Default)]
pub enum Warm<'a> {
    #[default]
    Cold,
    Trajectory(&'a Trajectory),
    Result(&'a SolveResult),
}

pub fn solve_scalarized(
    problem: &ControlProblem,
    spec: &ScalarizationSpec,
    config: TranscriptionConfig,
    options: &SolverOptions,
    warm: Warm<'_>,
) -> Result<SolveResult> {
    options.validate()?;
    let tr = transcribe(problem, config, Some(spec))?;
    let layout = tr.layout().clone();
    let start = match warm {
        Warm::Cold => NlpSolution::seed(tr.default_seed()),
        Warm::Trajectory(t) => NlpSolution::seed(tr.seed_from_trajectory(t)?),
        Warm::Result(prev) if prev.config == Some(config) && prev.nlp.z.len() == layout.dim => {
            let mut s = prev.nlp.clone();
            tr.finish_seed(&mut s.z);
            if s.ineq_multipliers.len() != layout.n_ineq() {
                s.ineq_multipliers.clear();
            }
            s
        }
        Warm::Result(prev) => NlpSolution::seed(tr.seed_from_trajectory(&prev.trajectory)?),
    };
    let sol = nlp::solve(&tr, options, Some(&start));
    let trajectory = extract_trajectory(&sol, &layout);
    let mut phi = Vec::with_capacity(problem.r());
    for i in 0..problem.r() {
        let v = problem.objective(i, trajectory.final_state(), trajectory.t_f) + spec.offsets[i];
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { index: i });
        }
        phi.push(v);
    }
    let adjoints = estimate_adjoints(&sol, &layout).unwrap_or_default();
    Ok(SolveResult {
        w_used: spec.weights.clone(),
        kind: spec.kind,
        objectives: ObjectiveVector(phi),
        alpha: layout.alpha(&sol.z),
        trajectory,
        adjoints,
        nlp_status: sol.status,
        kkt_residual: sol.kkt_residual,
        feas_violation: sol.feas_violation,
        iterations: sol.iterations,
        nlp: sol,
        config: Some(config),
    })
}

/// Minimizes objective `i` (zero-based) alone. Fails when the solver does.
pub fn ideal_cost(
    problem: &ControlProblem,
    config: TranscriptionConfig,
    options: &SolverOptions,
    i: usize,
    warm: Warm<'_>,
) -> Result<SolveResult> {
    let spec = ScalarizationSpec::single(i, problem.r());
    let res = solve_scalarized(problem, &spec, config, options, warm)?;
    if !res.is_success() {
        return Err(Error::SolveFailed { weights: res.w_used.clone(), status: res.nlp_status });
    }
    Ok(res)
}

/// All `r` ideal-cost solves, in objective order.
pub fn ideal_costs(
    problem: &ControlProblem,
    config: TranscriptionConfig,
    options: &SolverOptions,
    warm: Warm<'_>,
) -> Result<Vec<SolveResult>> {
    (0..problem.r()).map(|i| ideal_cost(problem, config, options, i, warm)).collect()
}

/// `beta_i = phi_i* - eta_i`, or the override verbatim. Without `eta` the
/// shift is `0.01 |phi_i*| + 0.01`.
pub fn utopia_vector(ideal: &[f64], eta: Option<&[f64]>, utopia_override: Option<&[f64]>) -> Result<Vec<f64>> {
    if let Some(u) = utopia_override {
        if u.len() != ideal.len() {
            return Err(Error::Dimension { what: "utopia override", expected: ideal.len(), found: u.len() });
        }
        return Ok(u.to_vec());
    }
    match eta {
        Some(e) => {
            if e.len() != ideal.len() {
                return Err(Error::Dimension { what: "eta", expected: ideal.len(), found: e.len() });
            }
            if e.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidConfig("eta must be positive".into()));
            }
            Ok(ideal.iter().zip(e).map(|(p, e)| p - e).collect())
        }
        None => Ok(ideal.iter().map(|p| p - (0.01 * p.abs() + 0.01)).collect()),
    }
}
