#![allow(dead_code)]

use pareto_ocp::front::{sweep_front, weight_grid, BisectionReport, FrontEvaluator, FrontPoint, LowerLevel, MasterObjective};
use pareto_ocp::nlp::{self, kkt_check, DenseNlp, KktReport, NlpSolution, SolverOptions};
use pareto_ocp::problem::{Bounds, ControlProblem, Horizon};
use pareto_ocp::transcription::{extract_trajectory, transcribe, Scheme, TranscriptionConfig};

/// Minimizes `(z0 - 1)^2 + (z1 - 2)^2` on `z0 + z1 = 1`; answer `(0, 1)`.
pub fn projection_program() -> DenseNlp {
    DenseNlp::new(2, |z| (z[0] - 1.0).powi(2) + (z[1] - 2.0).powi(2)).with_eq(1, |z, out| out[0] = z[0] + z[1] - 1.0)
}

/// Minimizes `(z - 1)^2` on `z >= 3`; answer `3`.
pub fn bounded_program() -> DenseNlp {
    DenseNlp::new(1, |z| (z[0] - 1.0).powi(2)).with_bounds(vec![3.0], vec![f64::INFINITY])
}

/// Goal attainment on two parabolas: min `t` with `0.5 x^2 <= t` and
/// `0.5 (x - 2)^2 <= t`; answer `x = 1`, `t = 0.5`.
pub fn attainment_program() -> DenseNlp {
    DenseNlp::new(2, |z| z[1])
        .with_ineq(2, |z, out| {
            out[0] = 0.5 * z[0] * z[0] - z[1];
            out[1] = 0.5 * (z[0] - 2.0).powi(2) - z[1];
        })
        .with_bounds(vec![f64::NEG_INFINITY, 0.0], vec![f64::INFINITY, f64::INFINITY])
}

/// Solution and KKT report of each closed-form program, with the known
/// minimizer.
pub fn closed_form_runs() -> Vec<(&'static str, NlpSolution, KktReport, Vec<f64>)> {
    let opts = SolverOptions::default();
    let cases: [(&str, DenseNlp, Vec<f64>); 3] = [
        ("projection", projection_program(), vec![0.0, 1.0]),
        ("bound", bounded_program(), vec![3.0]),
        ("attainment", attainment_program(), vec![1.0, 0.5]),
    ];
    cases
        .into_iter()
        .map(|(name, p, answer)| {
            let s = nlp::solve(&p, &opts, None);
            let r = kkt_check(&p, &s, 1e-8);
            (name, s, r, answer)
        })
        .collect()
}

/// `|x_N - e|` for `x' = x` on `[0, 1]`.
pub fn growth_error(n: usize, scheme: Scheme) -> f64 {
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
    (extract_trajectory(&s, tr.layout()).final_state()[0] - std::f64::consts::E).abs()
}

/// Brute-force minimizer of `F` over `points` evenly spaced weights.
pub fn brute_force(lower: &dyn LowerLevel, master: &MasterObjective, utopia: [f64; 2], lo: f64, hi: f64, points: usize) -> FrontPoint {
    let ev = FrontEvaluator::new(lower, master, utopia);
    sweep_front(&ev, &weight_grid(lo, hi, points))
        .into_iter()
        .min_by(|a, b| a.master_raw.total_cmp(&b.master_raw))
        .unwrap()
}

/// Interval halving and bracket preservation over every recorded
/// iteration. Returns a description of the first violation.
pub fn bisection_invariants(r: &BisectionReport) -> Result<(), String> {
    let (w0, wf) = r.essential_interval;
    let mut known = vec![(w0, r.endpoint_derivatives.0.value), (wf, r.endpoint_derivatives.1.value)];
    for it in &r.iterations {
        let expected = (wf - w0) / 2f64.powi(it.k as i32 - 1);
        if ((it.b - it.a) - expected).abs() > 1e-12 * (wf - w0) {
            return Err(format!("iteration {}: width {} instead of {}", it.k, it.b - it.a, expected));
        }
        if !(it.a < it.c && it.c < it.b) || (it.c - 0.5 * (it.a + it.b)).abs() > 1e-15 {
            return Err(format!("iteration {}: c = {} is not the midpoint", it.k, it.c));
        }
        let d = |w: f64| known.iter().find(|(x, _)| *x == w).map(|(_, d)| *d);
        match (d(it.a), d(it.b)) {
            (Some(da), Some(db)) if da * db < 0.0 => {}
            other => return Err(format!("iteration {}: derivatives at the ends {:?} do not bracket", it.k, other)),
        }
        known.push((it.c, it.derivative));
    }
    Ok(())
}
