//! Observers at the controller, the Kalman filter in the sensor node, and
//! exact estimators for the scalar two-step example.

mod burst;
mod observer;
mod sensor_kf;
mod two_step;

pub use burst::{general_estimate_burst, BurstEstimate};
pub use observer::{observer_update, tau_update, ObserverState};
pub use sensor_kf::{sensor_kf_step, SensorKf};
pub use two_step::{two_step_posterior, TwoStepBranch, TwoStepPosterior, TwoStepProblem};
