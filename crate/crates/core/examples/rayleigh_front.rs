//! Optimizes `100 t_f^2 + x3(t_f)^2` over the time/energy front of the
//! Rayleigh oscillator.
//!
//! ```text
//! cargo run --release --example rayleigh_front -- [N] [eps]
//! ```
//!
//! Defaults are N = 1000 and eps = 1.7e-6, which bisects to four decimals.

use std::time::Instant;

use pareto_ocp::front::{optimize_over_front, BisectionOptions, OcpLowerLevel};
use pareto_ocp::problems::{rayleigh, rayleigh_config, rayleigh_solver_options, RAYLEIGH_UTOPIA};

fn main() -> pareto_ocp::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(1000, |s| s.parse().expect("N"));
    let eps: f64 = args.next().map_or(1.7e-6, |s| s.parse().expect("eps"));

    let (problem, master) = rayleigh();
    let lower = OcpLowerLevel::new(problem, rayleigh_config(n), rayleigh_solver_options());
    let options = BisectionOptions { eps, utopia: Some(RAYLEIGH_UTOPIA), ..Default::default() };
    let start = Instant::now();
    let r = optimize_over_front(&lower, &master, &options)?;

    println!("min t_f      : t_f = {:.4}, x3 = {:.4}", r.min_phi1[0], r.min_phi1[1]);
    println!("min energy   : t_f = {:.4}, x3 = {:.4}", r.min_phi2[0], r.min_phi2[1]);
    println!("interval     : [{:.4}, {:.4}]", r.essential_interval.0, r.essential_interval.1);
    println!();
    println!("  k          c        F'(c)        sqrt F");
    for it in &r.iterations {
        println!("{:3}  {:.7}  {:+.4e}  {:.4}", it.k, it.c, it.derivative, it.master_raw.sqrt());
    }
    println!();
    println!("w*           : {:.4}", r.w_star);
    println!("objectives   : ({:.3}, {:.2})", r.objectives_at_star[0], r.objectives_at_star[1]);
    println!("sqrt master  : {:.2}", r.master_sqrt_at_star);
    println!("termination  : {:?}, {} solves in {:.1?}", r.termination, r.solves, start.elapsed());
    Ok(())
}
