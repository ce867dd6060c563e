//! Closed-loop episode engine and the experiments built on it.

mod dual_effect;
mod engine;
mod monte_carlo;
mod sweep;
mod trace;

pub use dual_effect::{dual_effect_experiment, DualEffectReport};
pub use engine::{prepare, run_episode, ControlLaw, EpisodeOptions, PreparedScenario};
pub use monte_carlo::{monte_carlo, GroupSummary, LoopSummary, MonteCarloResult, NetworkStats};
pub use sweep::{parse_grid, sweep_threshold, SweepResult, SweepRow};
pub use trace::{EpisodeResult, LoopTrace, SlotLogEntry, StepRecord};
