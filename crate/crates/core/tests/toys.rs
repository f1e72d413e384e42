mod common;

use common::*;
use pareto_ocp::front::{
    height_above_hull, lower_hull, optimize_over_front, sweep_front, sweep_weighted_sum, weight_grid, BisectionOptions,
    FrontEvaluator, LowerLevel, MasterObjective,
};
use pareto_ocp::problems::{ConvexParabolas, NonconvexFront};

fn unit_master() -> MasterObjective {
    MasterObjective::weighted_squared_norm(vec![1.0, 1.0]).unwrap()
}

#[test]
fn parabolas_match_brute_force() {
    let master = unit_master();
    let opts = BisectionOptions::default();
    let r = optimize_over_front(&ConvexParabolas, &master, &opts).unwrap();
    let (w0, wf) = r.essential_interval;
    let best = brute_force(&ConvexParabolas, &master, r.utopia, w0, wf, 2001);
    let spacing = (wf - w0) / 2000.0;
    // the forward difference vanishes half a step left of the true minimizer
    assert!((r.w_star - best.w).abs() <= spacing + opts.eps + opts.delta, "{} vs {}", r.w_star, best.w);
}

#[test]
fn parabolas_ideals() {
    let a = ConvexParabolas.ideal(0).unwrap();
    let b = ConvexParabolas.ideal(1).unwrap();
    assert!(a.objectives[0].abs() < 1e-12 && (a.objectives[1] - 4.0).abs() < 1e-9);
    assert!(b.objectives[1].abs() < 1e-12 && (b.objectives[0] - 4.0).abs() < 1e-9);
}

#[test]
fn weights_below_the_interval_repeat_the_boundary_point() {
    let master = unit_master();
    let r = optimize_over_front(&ConvexParabolas, &master, &BisectionOptions::default()).unwrap();
    let ev = FrontEvaluator::new(&ConvexParabolas, &master, r.utopia);
    for w in weight_grid(0.0, r.essential_interval.0, 5) {
        let p = ev.eval(w).unwrap();
        assert!((p.objectives[0] - r.min_phi2[0]).abs() < 1e-6 && (p.objectives[1] - r.min_phi2[1]).abs() < 1e-6);
    }
}

#[test]
fn chebyshev_reaches_the_dent_weighted_sum_does_not() {
    let master = unit_master();
    let curve: Vec<[f64; 2]> = weight_grid(0.0, 1.0, 20001).into_iter().map(NonconvexFront::objectives).collect();
    let hull = lower_hull(&curve);
    let grid = weight_grid(0.0, 1.0, 101);
    let ev = FrontEvaluator::new(&NonconvexFront, &master, [0.0, 0.0]);
    let cheb = sweep_front(&ev, &grid);
    let ws = sweep_weighted_sum(&NonconvexFront, &master, &grid);
    let above: Vec<[f64; 2]> = cheb
        .iter()
        .map(|p| p.objectives)
        .filter(|p| height_above_hull(*p, &hull).is_some_and(|h| h > 1e-3))
        .collect();
    assert!(!above.is_empty());
    for p in &above {
        let near = ws.iter().any(|q| (q.objectives[0] - p[0]).hypot(q.objectives[1] - p[1]) < 1e-3);
        assert!(!near, "weighted sum reached {p:?}");
    }
    // some of them lie in the dent that starts left of the middle
    assert!(above.iter().any(|p| (0.2..0.5).contains(&p[0])));
}

#[test]
fn cache_returns_identical_solutions() {
    let master = unit_master();
    let ev = FrontEvaluator::new(&NonconvexFront, &master, [0.0, 0.0]);
    let a = ev.eval(0.37).unwrap();
    let b = ev.eval(0.37).unwrap();
    assert_eq!(a, b);
    assert_eq!(ev.solve_count(), 1);
}
