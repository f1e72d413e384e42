//! Optimal TB treatment on the front of infection cost against treatment
//! cost, with delayed infection and delayed treatment effect.
//!
//! Runs the bisection for the control closest to the origin of objective
//! space, then checks the on-off structure of the controls at both ends of
//! the essential interval and at the optimum.
//!
//! ```text
//! cargo run --release --example tb_front -- [N]
//! ```
//!
//! N must be a multiple of 50 so that both delays are whole steps.

use std::time::Instant;

use pareto_ocp::front::{optimize_over_front, BisectionOptions, FrontEvaluator, OcpLowerLevel};
use pareto_ocp::problems::{tb_config, tb_solver_options, tuberculosis, TbParameters, TB_UTOPIA};
use pareto_ocp::verify::tb_switching;

fn main() -> pareto_ocp::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(500, |s| s.parse().expect("N"));
    let params = TbParameters::default();
    let (problem, master) = tuberculosis(params.beta)?;
    let lower = OcpLowerLevel::new(problem, tb_config(n), tb_solver_options());
    let options = BisectionOptions { utopia: Some(TB_UTOPIA), ..Default::default() };

    let start = Instant::now();
    let r = optimize_over_front(&lower, &master, &options)?;
    println!("interval     : [{:.4}, {:.4}]", r.essential_interval.0, r.essential_interval.1);
    println!("w*           : {:.4} after {} iterations", r.w_star, r.iterations.len());
    println!("objectives   : ({:.0}, {:.0})", r.objectives_at_star[0], r.objectives_at_star[1]);
    println!("sqrt master  : {:.0}", r.master_sqrt_at_star);
    println!("solves       : {} in {:.1?}", r.solves, start.elapsed());
    println!();

    // the three verification solves warm-start from each other
    let ev = FrontEvaluator::new(&lower, &master, r.utopia);
    println!("     w    u1 off   u2 off      L2   verdict");
    for w in [r.essential_interval.0, r.w_star, r.essential_interval.1] {
        let sol = ev.solution(w)?;
        let d = sol.detail.as_ref().expect("control solution");
        let report = tb_switching(d, w, &params)?;
        let off = |k: usize| report.channels[k].control.switch_times.first().copied().unwrap_or(f64::NAN);
        println!(
            "{w:.4}  {:7.3}  {:7.3}  {:6.1}   {}",
            off(0),
            off(1),
            d.trajectory.final_state()[3],
            if report.passed { "on-off" } else { "not verified" }
        );
    }
    Ok(())
}
