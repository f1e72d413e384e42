//! Counts scalarized solves: bisection against a uniform weight sweep that
//! would pin down w* to the same resolution.
//!
//! ```text
//! cargo run --release --example budget_comparison -- [N]
//! ```

use pareto_ocp::front::{optimize_over_front, BisectionOptions, OcpLowerLevel};
use pareto_ocp::problems::{rayleigh, rayleigh_config, rayleigh_solver_options, RAYLEIGH_UTOPIA};

fn main() -> pareto_ocp::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(1000, |s| s.parse().expect("N"));
    let (problem, master) = rayleigh();
    let lower = OcpLowerLevel::new(problem, rayleigh_config(n), rayleigh_solver_options());
    let options = BisectionOptions { eps: 1.7e-6, utopia: Some(RAYLEIGH_UTOPIA), ..Default::default() };
    let r = optimize_over_front(&lower, &master, &options)?;

    let last = r.iterations.last().expect("at least one iteration");
    let resolution = 0.5 * (last.b - last.a);
    let (w0, wf) = r.essential_interval;
    // a sweep with spacing `resolution` plus the two ideal solves
    let sweep = 2 + ((wf - w0) / resolution).ceil() as usize + 1;
    println!("w*                 : {:.6}", r.w_star);
    println!("resolution         : {resolution:.2e}");
    println!("bisection solves   : {}", r.solves);
    println!("equivalent sweep   : {sweep}");
    Ok(())
}
