use nalgebra::DVector;

use crate::network::SlotEvent;

/// One sampling instant of one loop.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub tick: u64,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub gamma: bool,
    pub delta: bool,
    /// Transmissions spent in the contention window; 0 when `γ = 0`.
    pub attempts: usize,
    pub collisions: usize,
    /// `x̂_{k|k}`.
    pub xhat: DVector<f64>,
    /// `x̂_{k|τ_{k-1}}`.
    pub predicted: DVector<f64>,
    /// `τ_k`.
    pub tau: i64,
    /// `‖s_k - x̂_{k|τ_{k-1}}‖²` for the scheduler's state `s_k`.
    pub innovation_sq: f64,
    /// `x_kᵀ Q1 x_k + u_kᵀ Q2 u_k`.
    pub stage_cost: f64,
}

impl StepRecord {
    /// `x̃_{k|k} = x_k - x̂_{k|k}`.
    pub fn error(&self) -> DVector<f64> {
        &self.x - &self.xhat
    }

    /// `d_k = k - τ_k`.
    pub fn delay(&self) -> i64 {
        self.k as i64 - self.tau
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopTrace {
    pub loop_index: usize,
    pub name: String,
    pub group: String,
    pub horizon: usize,
    pub steps: Vec<StepRecord>,
    /// `x_N`, present once the episode has run to completion.
    pub terminal_state: Option<DVector<f64>>,
}

impl LoopTrace {
    pub fn gammas(&self) -> impl Iterator<Item = bool> + '_ {
        self.steps.iter().map(|s| s.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotLogEntry {
    pub tick: u64,
    pub event: SlotEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub episode: u64,
    pub loops: Vec<LoopTrace>,
    /// Empty unless slot recording was requested.
    pub slots: Vec<SlotLogEntry>,
    /// Most successes observed in any single mini-slot.
    pub max_successes_per_slot: usize,
    /// `x_Nᵀ Q0 x_N` per loop, in loop order.
    pub terminal_costs: Vec<f64>,
}
