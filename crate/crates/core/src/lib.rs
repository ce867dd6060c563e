//! Simulation of linear control loops whose sensors share a contention-based
//! medium.
//!
//! Each loop runs a state-based scheduler in the sensor node, contends for the
//! shared channel through a p-persistent CSMA mechanism, and is closed by an
//! observer and a certainty-equivalent LQG controller. The dual predictor
//! configuration (innovation-threshold scheduler, model-prediction observer,
//! `u = -L x̂` controller) is the main subject; state-threshold and half-line
//! schedulers exist to study the dual effect of control.
//!
//! Module map:
//!
//! * [`model`]: plant dynamics, loop and scenario configuration, noise.
//! * [`rng`]: seeded, coordinate-addressed random streams.
//! * [`stats`]: Gaussian densities, truncated moments, quadrature, root finding.
//! * [`scheduling`]: scheduler policies producing the request bit `γ`.
//! * [`network`]: contention resolution and exogenous traffic.
//! * [`estimation`]: observers, the sensor-side Kalman filter and exact
//!   estimators for the two-step example.
//! * [`control`]: Riccati recursion, controllers, cost evaluation and the
//!   two-step dual-effect controller.
//! * [`sim`]: episode engine, Monte Carlo, threshold sweep and the dual-effect
//!   experiment.
//! * [`scenario`] and [`output`]: scenario files, presets, CSV and manifests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod estimation;
pub mod model;
pub mod network;
pub mod output;
pub mod rng;
pub mod scenario;
pub mod scheduling;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use model::{LoopConfig, NetworkScenario, PlantModel, Weights};
pub use network::{CrmConfig, TrafficSource};
pub use rng::RngStream;
pub use scheduling::SchedulerPolicy;
