use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::MasterObjective;
use crate::nlp::SolverOptions;
use crate::problem::{simulate, Bounds, ControlProblem, Horizon};
use crate::transcription::{Scheme, TranscriptionConfig};

pub const TB_UTOPIA: [f64; 2] = [0.0, 0.0];

/// Model constants. Rates are per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TbParameters {
    /// Transmission coefficient.
    pub beta: f64,
    pub mu: f64,
    pub delta: f64,
    pub phi: f64,
    pub omega: f64,
    pub omega_r: f64,
    pub sigma: f64,
    pub sigma_r: f64,
    pub tau0: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub population: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub t_f: f64,
    pub d_i: f64,
    pub d_u1: f64,
    pub d_u2: f64,
    /// Control costs, row `i` for objective `i`.
    pub a: [[f64; 2]; 2],
}

impl Default for TbParameters {
    fn default() -> Self {
        Self {
            beta: 100.0,
            mu: 1.0 / 70.0,
            delta: 12.0,
            phi: 0.05,
            omega: 0.0002,
            omega_r: 0.00002,
            sigma: 0.25,
            sigma_r: 0.25,
            tau0: 2.0,
            tau1: 2.0,
            tau2: 1.0,
            population: 30000.0,
            eps1: 0.5,
            eps2: 0.5,
            t_f: 5.0,
            d_i: 0.1,
            d_u1: 0.2,
            d_u2: 0.2,
            a: [[10.0, 10.0], [1000.0, 1000.0]],
        }
    }
}

impl TbParameters {
    /// `(S, L1, I, L2, x5, x6)` at time zero.
    pub fn initial_state(&self) -> [f64; 6] {
        let n = self.population;
        [76.0 * n / 120.0, 36.0 * n / 120.0, 5.0 * n / 120.0, 2.0 * n / 120.0, 0.0, 0.0]
    }
}

/// `R = N - S - L1 - I - L2`
pub fn recovered(x: &[f64], population: f64) -> f64 {
    population - x[0] - x[1] - x[2] - x[3]
}

/// Delayed TB model with the default constants and the given transmission
/// coefficient.
pub fn tuberculosis(beta: f64) -> Result<(ControlProblem, MasterObjective)> {
    tuberculosis_with(TbParameters { beta, ..TbParameters::default() })
}

/// States `(S, L1, I, L2, x5, x6)` where `x5`, `x6` accumulate the two
/// running costs, controls `(u1, u2)` in `[0, 1]`, fixed horizon. The
/// infectious compartment enters its own equation with a diagnosis delay
/// and the controls act with treatment delays. Master objective
/// `x5^2 + x6^2`.
pub fn tuberculosis_with(p: TbParameters) -> Result<(ControlProblem, MasterObjective)> {
    if !(p.beta > 0.0) {
        return Err(Error::InvalidProblem(format!("transmission coefficient must be positive, got {}", p.beta)));
    }
    let x0 = p.initial_state();
    let i0 = x0[2];
    let problem = ControlProblem::builder("tuberculosis", 6, 2)
        .dynamics(move |a, out| {
            let [s, l1, i, l2] = [a.x[0], a.x[1], a.x[2], a.x[3]];
            let r = recovered(a.x, p.population);
            let force = p.beta / p.population * i;
            let (v1, v2) = (a.u_delayed[0], a.u_delayed[1]);
            out[0] = p.mu * p.population - force * s - p.mu * s;
            out[1] = force * (s + p.sigma * l2 + p.sigma_r * r) - (p.delta + p.tau1 + p.eps1 * v1 + p.mu) * l1;
            out[2] = p.phi * p.delta * l1 + p.omega * l2 + p.omega_r * r - p.tau0 * a.x_delayed[2] - p.mu * i;
            out[3] = (1.0 - p.phi) * p.delta * l1 - p.sigma * force * l2 - (p.omega + p.eps2 * v2 + p.tau2 + p.mu) * l2;
            let base = i + l2;
            out[4] = base + p.a[0][0] * a.u[0] + p.a[0][1] * a.u[1];
            out[5] = base + p.a[1][0] * a.u[0] + p.a[1][1] * a.u[1];
        })
        .state_delay(p.d_i)
        .control_delays(vec![p.d_u1, p.d_u2])
        .state_history(move |_t, out| {
            out.copy_from_slice(&x0);
            out[2] = i0;
        })
        .control_history(|_t, out| out.fill(0.0))
        .initial_state(x0.to_vec())
        .control_bounds(vec![Bounds::new(0.0, 1.0); 2])
        .state_bounds(state_bounds(&p))
        .horizon(Horizon::Fixed(p.t_f))
        .objective(|x, _| x[4])
        .objective(|x, _| x[5])
        .state_scale(vec![1e3; 6])
        .objective_scale(1e4)
        .build()?;
    let master = MasterObjective::weighted_squared_norm(vec![1.0, 1.0])?;
    Ok((problem, master))
}

/// Compartments stay in `[0, N]`; the running costs are capped by their
/// value under full treatment of the whole population.
fn state_bounds(p: &TbParameters) -> Vec<Bounds> {
    let mut b = vec![Bounds::new(0.0, p.population); 4];
    for row in p.a {
        b.push(Bounds::new(0.0, p.t_f * (p.population + row[0] + row[1])));
    }
    b
}

/// Starts from a large penalty: at the default one the first inner solves
/// wander far from feasibility and exhaust their budget.
pub fn tb_solver_options() -> SolverOptions {
    SolverOptions { tol_kkt: 1e-7, max_outer: 60, initial_penalty: 1e4, ..SolverOptions::default() }
}

/// Trapezoidal mesh; `intervals` must make both delays whole steps.
pub fn tb_config(intervals: usize) -> TranscriptionConfig {
    TranscriptionConfig::new(intervals, Scheme::Trapezoidal).with_t_f_guess(5.0)
}

/// Reference on-off solutions: weight, objectives, switch-off times of
/// `(u1, u2)` and terminal `(S, L1, I, L2, R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TbReference {
    pub w: f64,
    pub objectives: [f64; 2],
    pub switching: [f64; 2],
    pub terminal: [f64; 5],
}

pub const TB_REFERENCE: [TbReference; 3] = [
    TbReference {
        w: 0.5251,
        objectives: [28155.0, 31133.0],
        switching: [0.145, 2.864],
        terminal: [1193.1, 28.2, 13.3, 864.0, 27901.4],
    },
    TbReference {
        w: 0.5358,
        objectives: [27255.0, 31455.0],
        switching: [0.809, 3.439],
        terminal: [1205.8, 27.5, 13.0, 747.6, 28006.1],
    },
    TbReference {
        w: 0.5709,
        objectives: [26459.0, 35205.0],
        switching: [4.083, 4.752],
        terminal: [1238.2, 23.8, 11.2, 419.3, 28307.5],
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub beta: f64,
    /// Sum of squared relative errors over all compartments and rows.
    pub loss: f64,
}

/// Simulated terminal `(S, L1, I, L2, R)` under on-off controls that
/// switch off at the given times.
pub fn simulate_on_off(p: &TbParameters, switching: [f64; 2], intervals: usize) -> Result<[f64; 5]> {
    let (problem, _) = tuberculosis_with(*p)?;
    let traj = simulate(&problem, p.t_f, intervals, |t, u| {
        u[0] = if t < switching[0] { 1.0 } else { 0.0 };
        u[1] = if t < switching[1] { 1.0 } else { 0.0 };
    })?;
    let x = traj.final_state();
    Ok([x[0], x[1], x[2], x[3], recovered(x, p.population)])
}

/// Fits the transmission coefficient on `[lo, hi]` so that the reference
/// on-off controls reproduce the reference terminal compartments, by a
/// coarse scan followed by golden-section refinement.
pub fn calibrate_beta(
    base: &TbParameters,
    rows: &[TbReference],
    intervals: usize,
    lo: f64,
    hi: f64,
) -> Result<BetaFit> {
    if !(0.0 < lo && lo < hi) || rows.is_empty() {
        return Err(Error::InvalidConfig("calibration needs 0 < lo < hi and at least one row".into()));
    }
    let loss = |beta: f64| -> Result<f64> {
        let p = TbParameters { beta, ..*base };
        let mut total = 0.0;
        for row in rows {
            let sim = simulate_on_off(&p, row.switching, intervals)?;
            total += sim.iter().zip(&row.terminal).map(|(s, r)| ((s - r) / r).powi(2)).sum::<f64>();
        }
        Ok(total)
    };
    let scan = 40;
    let mut best = (lo, f64::INFINITY);
    for k in 0..=scan {
        let b = lo + (hi - lo) * k as f64 / scan as f64;
        let l = loss(b)?;
        if l < best.1 {
            best = (b, l);
        }
    }
    let step = (hi - lo) / scan as f64;
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (loss(c)?, loss(d)?);
    while b - a > 1e-6 * (1.0 + a.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = loss(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = loss(d)?;
        }
    }
    let beta = 0.5 * (a + b);
    Ok(BetaFit { beta, loss: loss(beta)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{eval_dynamics, DelayOffsets};

    #[test]
    fn population_closes_at_start() {
        let p = TbParameters::default();
        let x = p.initial_state();
        let r = recovered(&x, p.population);
        assert!((r - p.population / 120.0).abs() < 1e-9);
        assert!((x[..4].iter().sum::<f64>() + r - 30000.0).abs() < 1e-9);
    }

    #[test]
    fn delays_align_on_hundredth_steps() {
        let (prob, _) = tuberculosis(100.0).unwrap();
        let o = DelayOffsets::new(&prob, 0.01).unwrap();
        assert_eq!((o.state, o.controls.clone()), (10, vec![20, 20]));
    }

    #[test]
    fn delayed_controls_are_inert_before_their_delay() {
        let p = TbParameters::default();
        let (prob, _) = tuberculosis_with(p).unwrap();
        let on = simulate(&prob, p.t_f, 500, |_, u| u.fill(1.0)).unwrap();
        let off = simulate(&prob, p.t_f, 500, |_, u| u.fill(0.0)).unwrap();
        // the epidemic states only see u after 0.2 years; the Heun corrector
        // of the step ending at node 20 is the first to read u(0)
        for k in 0..20 {
            for i in 0..4 {
                assert_eq!(on.states[k][i], off.states[k][i], "node {k} state {i}");
            }
        }
        assert!(on.states[25][1] < off.states[25][1]);
        let f = eval_dynamics(&prob, &on, 0).unwrap();
        assert!((f[4] - (p.initial_state()[2] + p.initial_state()[3] + 20.0)).abs() < 1e-9);
    }

    #[test]
    fn uncontrolled_compartments_stay_in_range() {
        let p = TbParameters::default();
        let (prob, _) = tuberculosis_with(p).unwrap();
        let traj = simulate(&prob, p.t_f, 500, |_, u| u.fill(0.0)).unwrap();
        for x in &traj.states {
            let r = recovered(x, p.population);
            for v in x[..4].iter().chain([&r]) {
                assert!((0.0..=p.population).contains(v), "{v}");
            }
        }
    }

    #[test]
    fn invalid_beta_is_rejected() {
        assert!(tuberculosis(0.0).is_err());
        assert!(tuberculosis(f64::NAN).is_err());
    }
}
