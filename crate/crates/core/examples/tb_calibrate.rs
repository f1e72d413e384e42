//! Fits the TB transmission coefficient so that the reference on-off
//! treatment schedules reproduce the reference terminal compartments.

use pareto_ocp::problems::{calibrate_beta, simulate_on_off, TbParameters, TB_REFERENCE};

fn main() -> pareto_ocp::Result<()> {
    let base = TbParameters::default();
    let fit = calibrate_beta(&base, &TB_REFERENCE, 500, 20.0, 200.0)?;
    println!("beta = {:.3} (loss {:.2e})", fit.beta, fit.loss);

    let p = TbParameters { beta: fit.beta, ..base };
    println!();
    println!("     w         S       L1        I       L2          R");
    for row in &TB_REFERENCE {
        let sim = simulate_on_off(&p, row.switching, 500)?;
        let line = |v: &[f64; 5]| v.iter().map(|x| format!("{x:9.1}")).collect::<String>();
        println!("{:.4} {}   simulated", row.w, line(&sim));
        println!("       {}   reference", line(&row.terminal));
    }
    Ok(())
}
