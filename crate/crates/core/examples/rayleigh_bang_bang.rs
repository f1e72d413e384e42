//! Checks that the time-optimal Rayleigh control is bang-bang and switches
//! where its switching function `16 lambda_2` changes sign.
//!
//! ```text
//! cargo run --release --example rayleigh_bang_bang -- [N]
//! ```

use pareto_ocp::front::{essential_interval, FrontEvaluator, LowerLevel, OcpLowerLevel};
use pareto_ocp::problems::{rayleigh, rayleigh_config, rayleigh_solver_options, RAYLEIGH_UTOPIA};
use pareto_ocp::verify::rayleigh_switching;

fn main() -> pareto_ocp::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(1000, |s| s.parse().expect("N"));
    let (problem, master) = rayleigh();
    let lower = OcpLowerLevel::new(problem, rayleigh_config(n), rayleigh_solver_options());

    let s1 = lower.ideal(0)?;
    let s2 = lower.ideal(1)?;
    let pair = |s: &pareto_ocp::front::LowerSolution| [s.objectives[0], s.objectives[1]];
    let (w0, wf) = essential_interval(pair(&s1), pair(&s2), RAYLEIGH_UTOPIA)?;

    let ev = FrontEvaluator::new(&lower, &master, RAYLEIGH_UTOPIA);
    ev.anchor(wf, s1);
    ev.anchor(w0, s2);
    let sol = ev.solution(wf)?;
    let detail = sol.detail.as_ref().expect("control solution");
    let report = rayleigh_switching(detail, wf, wf)?;

    let ch = &report.channels[0];
    println!("w_f          : {wf:.4}");
    println!("t_f          : {:.4}", detail.trajectory.t_f);
    println!("structure    : {:?}", ch.control.structure);
    println!("switch times : {:?}", ch.control.switch_times);
    println!("sigma zeros  : {:?}", ch.sigma_switch_times);
    println!("agreement    : {:.1}%", 100.0 * ch.agreement);
    println!("verdict      : {}", if report.passed { "bang-bang" } else { "not verified" });
    Ok(())
}
