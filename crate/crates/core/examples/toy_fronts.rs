//! Two static fronts with exact answers.
//!
//! On a front with a concave dent, the Chebyshev sweep lands inside the dent
//! while the weighted-sum sweep jumps over it. On both fronts the bisection
//! result is compared with a brute-force scan of the master objective.

use pareto_ocp::front::{
    height_above_hull, lower_hull, optimize_over_front, sweep_front, sweep_weighted_sum, weight_grid, BisectionOptions,
    FrontEvaluator, FrontPoint, LowerLevel, MasterObjective,
};
use pareto_ocp::problems::{ConvexParabolas, NonconvexFront};

fn compare(name: &str, lower: &dyn LowerLevel, master: &MasterObjective) -> pareto_ocp::Result<()> {
    let r = optimize_over_front(lower, master, &BisectionOptions::default())?;
    let (w0, wf) = r.essential_interval;
    let ev = FrontEvaluator::new(lower, master, r.utopia);
    let grid = weight_grid(w0, wf, 2001);
    let best = sweep_front(&ev, &grid)
        .into_iter()
        .min_by(|a, b| a.master_raw.total_cmp(&b.master_raw))
        .expect("nonempty grid");
    println!(
        "{name}: bisection w* = {:.4} (F = {:.5}, {:?}), brute force w = {:.4} (F = {:.5})",
        r.w_star, r.master_at_star, r.termination, best.w, best.master_raw
    );
    Ok(())
}

fn main() -> pareto_ocp::Result<()> {
    let master = MasterObjective::weighted_squared_norm(vec![1.0, 1.0])?;
    compare("parabolas ", &ConvexParabolas, &master)?;
    compare("dented    ", &NonconvexFront, &master)?;

    let grid = weight_grid(0.0, 1.0, 101);
    let ev = FrontEvaluator::new(&NonconvexFront, &master, [0.0, 0.0]);
    let cheb = sweep_front(&ev, &grid);
    let ws = sweep_weighted_sum(&NonconvexFront, &master, &grid);
    // the hull of a dense sample of the curve itself
    let curve: Vec<[f64; 2]> = weight_grid(0.0, 1.0, 20001).into_iter().map(NonconvexFront::objectives).collect();
    let hull = lower_hull(&curve);
    let above = |pts: &[FrontPoint]| {
        pts.iter().filter(|p| height_above_hull(p.objectives, &hull).is_some_and(|h| h > 1e-3)).count()
    };
    println!();
    println!("points more than 1e-3 above the convex hull, out of 101:");
    println!("  chebyshev    : {}", above(&cheb));
    println!("  weighted sum : {}", above(&ws));
    Ok(())
}
