//! Defining a new bi-objective control problem and solving it.
//!
//! A double integrator is driven from rest at -1 to rest at 0. The two
//! objectives are the transfer time and the control energy.
//!
//! Left alone the system never moves, so the default starting guess (a
//! simulation under mid-range controls) is useless here. A simulated
//! accelerate-then-brake manoeuvre is passed as the seed instead.

use pareto_ocp::front::{optimize_over_front, BisectionOptions, MasterObjective, OcpLowerLevel};
use pareto_ocp::nlp::SolverOptions;
use pareto_ocp::problem::{simulate, Bounds, ControlProblem, Horizon};
use pareto_ocp::scalarize::{solve_scalarized, ScalarizationSpec, Warm};
use pareto_ocp::transcription::{Scheme, TranscriptionConfig};

fn main() -> pareto_ocp::Result<()> {
    let problem = ControlProblem::builder("double-integrator", 3, 1)
        .dynamics(|a, out| {
            out[0] = a.x[1];
            out[1] = a.u[0];
            out[2] = a.u[0] * a.u[0];
        })
        .initial_state(vec![-1.0, 0.0, 0.0])
        .boundary_eq(2, |_x0, xf, _tf, out| {
            out[0] = xf[0];
            out[1] = xf[1];
        })
        .control_bounds(vec![Bounds::new(-1.0, 1.0)])
        .horizon(Horizon::Free { max: 6.0 })
        .objective(|_x, tf| tf)
        .objective(|x, _tf| x[2])
        .build()?;
    let config = TranscriptionConfig::new(100, Scheme::Trapezoidal).with_t_f_guess(3.0);
    // time and energy are O(1) while the defects are O(1/N) per node, so the
    // penalty starts high enough that shrinking t_f cannot pay for them
    let options = SolverOptions { tol_kkt: 1e-7, initial_penalty: 1e4, ..SolverOptions::default() };

    let seed = simulate(&problem, 2.0, 100, |t, u| u[0] = if t < 1.0 { 1.0 } else { -1.0 })?;

    let spec = ScalarizationSpec::chebyshev(0.5, [0.0, 0.0]);
    let one = solve_scalarized(&problem, &spec, config, &options, Warm::Trajectory(&seed))?;
    println!(
        "w = 0.5: t_f = {:.4}, energy = {:.4}, status {:?}",
        one.objectives.0[0], one.objectives.0[1], one.nlp_status
    );

    let master = MasterObjective::weighted_squared_norm(vec![1.0, 1.0])?;
    let lower = OcpLowerLevel::new(problem, config, options).with_seed(seed);
    let r = optimize_over_front(&lower, &master, &BisectionOptions { utopia: Some([0.0, 0.0]), ..Default::default() })?;
    println!(
        "closest to the origin: w* = {:.4}, t_f = {:.4}, energy = {:.4} ({} solves)",
        r.w_star, r.objectives_at_star[0], r.objectives_at_star[1], r.solves
    );
    Ok(())
}
