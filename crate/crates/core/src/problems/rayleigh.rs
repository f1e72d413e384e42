use crate::front::MasterObjective;
use crate::nlp::SolverOptions;
use crate::problem::{Bounds, ControlProblem, Horizon};
use crate::transcription::{Scheme, TranscriptionConfig};

pub const RAYLEIGH_T_F_MAX: f64 = 5.0;
pub const RAYLEIGH_UTOPIA: [f64; 2] = [0.0, 0.0];

/// Rayleigh (tunnel-diode) oscillator steered to the origin, trading the
/// final time against the control-plus-state energy `x3(t_f)`.
///
/// ```text
/// x1' = x2
/// x2' = -x1 + x2 (1.4 - 0.14 x2^2) + 4u
/// x3' = x1^2 + u^2
/// ```
///
/// `x(0) = (-5, -5, 0)`, `x1(t_f) = x2(t_f) = 0`, `|u| <= 1`, `t_f <= 5`.
/// The master objective is `100 t_f^2 + x3(t_f)^2`.
pub fn rayleigh() -> (ControlProblem, MasterObjective) {
    let problem = ControlProblem::builder("rayleigh", 3, 1)
        .dynamics(|a, out| {
            let (x1, x2, u) = (a.x[0], a.x[1], a.u[0]);
            out[0] = x2;
            out[1] = -x1 + x2 * (1.4 - 0.14 * x2 * x2) + 4.0 * u;
            out[2] = x1 * x1 + u * u;
        })
        .initial_state(vec![-5.0, -5.0, 0.0])
        .boundary_eq(2, |_x0, xf, _tf, out| {
            out[0] = xf[0];
            out[1] = xf[1];
        })
        .control_bounds(vec![Bounds::new(-1.0, 1.0)])
        .horizon(Horizon::Free { max: RAYLEIGH_T_F_MAX })
        .objective(|_x, tf| tf)
        .objective(|x, _tf| x[2])
        .state_scale(vec![1.0, 1.0, 10.0])
        .build()
        .expect("rayleigh problem is well formed");
    let master = MasterObjective::weighted_squared_norm(vec![100.0, 1.0]).expect("valid weights");
    (problem, master)
}

/// Solver settings used for the Rayleigh runs.
pub fn rayleigh_solver_options() -> SolverOptions {
    SolverOptions { tol_kkt: 1e-7, max_outer: 60, ..SolverOptions::default() }
}

/// Trapezoidal mesh with a starting horizon of 4.
pub fn rayleigh_config(intervals: usize) -> TranscriptionConfig {
    TranscriptionConfig::new(intervals, Scheme::Trapezoidal).with_t_f_guess(4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{eval_dynamics, Trajectory};

    fn single_node(x: Vec<f64>, u: f64) -> Trajectory {
        Trajectory {
            times: vec![0.0, 1.0],
            states: vec![x.clone(), x],
            controls: vec![vec![u], vec![u]],
            t_f: 1.0,
        }
    }

    #[test]
    fn rates_at_start_and_rest() {
        let (p, _) = rayleigh();
        let f = eval_dynamics(&p, &single_node(vec![-5.0, -5.0, 0.0], 0.0), 0).unwrap();
        // x2' = 5 - 5 (1.4 - 3.5) = 15.5
        for (a, b) in f.iter().zip([-5.0, 15.5, 25.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let f = eval_dynamics(&p, &single_node(vec![0.0, 0.0, 7.0], 0.0), 0).unwrap();
        assert_eq!(f, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn master_value_at_reported_point() {
        let (_, m) = rayleigh();
        let raw = m.value(&[3.709, 45.51]);
        assert!((raw - 3446.8282).abs() < 1e-9);
        assert!((m.reported(raw) - 58.71).abs() < 5e-3);
    }
}
