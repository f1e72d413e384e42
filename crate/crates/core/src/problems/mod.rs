//! Built-in problems: the Rayleigh oscillator, a delayed tuberculosis
//! model, and two static toys with closed-form or grid oracles.

mod rayleigh;
mod toys;
mod tuberculosis;

pub use rayleigh::{rayleigh, rayleigh_config, rayleigh_solver_options, RAYLEIGH_T_F_MAX, RAYLEIGH_UTOPIA};
pub use toys::{ConvexParabolas, NonconvexFront};
pub use tuberculosis::{
    calibrate_beta, recovered, simulate_on_off, tb_config, tb_solver_options, tuberculosis, tuberculosis_with, BetaFit, TbParameters, TbReference,
    TB_REFERENCE, TB_UTOPIA,
};
