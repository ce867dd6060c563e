//! Finite-horizon LQ machinery, cost accounting and the scalar two-step
//! controller with dual effect.

mod cost;
mod riccati;
mod two_step;

pub use cost::{evaluate_cost, CostReport, EpisodeCost};
pub use riccati::{ce_control, jdp_closed_form, riccati_backward, RiccatiSolution};
pub use two_step::{
    ce_u0, stationarity_residual, two_step_s1, two_step_u0_optimal, two_step_u1, two_step_value,
    TwoStepSolution,
};
