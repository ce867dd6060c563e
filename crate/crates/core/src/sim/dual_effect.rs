use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scheduling::is_symmetric_control_free;

use super::engine::{run_episode, ControlLaw, EpisodeOptions, PreparedScenario};
use super::trace::EpisodeResult;

/// Paired comparison of two control laws on common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEffectReport {
    pub episodes: usize,
    /// True when every loop's scheduler ignores past controls.
    pub control_free: bool,
    /// Episodes whose `γ` sequences differ in any loop.
    pub diverged_episodes: usize,
    /// Earliest global tick at which any episode diverged.
    pub first_divergence_tick: Option<u64>,
    /// Mean divergence tick over diverged episodes.
    pub mean_divergence_tick: Option<f64>,
    /// `E‖x̃_{k|k}‖²` under each law, averaged over loops and steps.
    pub mse: (f64, f64),
    /// Mean and standard error of the paired per-episode difference.
    pub mse_diff: f64,
    pub mse_diff_se: f64,
}

fn first_divergence(a: &EpisodeResult, b: &EpisodeResult) -> Option<u64> {
    a.loops
        .iter()
        .zip(&b.loops)
        .filter_map(|(la, lb)| {
            la.steps
                .iter()
                .zip(&lb.steps)
                .find(|(sa, sb)| sa.gamma != sb.gamma)
                .map(|(sa, _)| sa.tick)
        })
        .min()
}

fn episode_mse(e: &EpisodeResult) -> f64 {
    let (sum, n) = e
        .loops
        .iter()
        .flat_map(|l| &l.steps)
        .fold((0.0, 0usize), |(s, n), st| (s + st.error().norm_squared(), n + 1));
    sum / n as f64
}

/// Runs both laws on identical seeds and compares scheduling decisions and
/// estimation error.
pub fn dual_effect_experiment(
    prepared: &PreparedScenario,
    law_a: ControlLaw,
    law_b: ControlLaw,
    seed: u64,
    episodes: usize,
) -> Result<DualEffectReport> {
    if law_a == law_b {
        return Err(Error::Config("dual-effect experiment needs two different control laws".into()));
    }
    if episodes < 2 {
        return Err(Error::Config("dual-effect experiment needs at least two episodes".into()));
    }
    let per_episode = (0..episodes as u64)
        .into_par_iter()
        .map(|e| {
            let a = run_episode(prepared, seed, e, &EpisodeOptions { law: law_a, record_slots: false })?;
            let b = run_episode(prepared, seed, e, &EpisodeOptions { law: law_b, record_slots: false })?;
            Ok((first_divergence(&a, &b), episode_mse(&a), episode_mse(&b)))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = episodes as f64;
    let ticks: Vec<u64> = per_episode.iter().filter_map(|p| p.0).collect();
    let mse_a = per_episode.iter().map(|p| p.1).sum::<f64>() / n;
    let mse_b = per_episode.iter().map(|p| p.2).sum::<f64>() / n;
    let diff = mse_a - mse_b;
    let var = per_episode
        .iter()
        .map(|p| (p.1 - p.2 - diff).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    Ok(DualEffectReport {
        episodes,
        control_free: prepared
            .scenario
            .loops
            .iter()
            .all(|l| is_symmetric_control_free(&l.scheduler)),
        diverged_episodes: ticks.len(),
        first_divergence_tick: ticks.iter().copied().min(),
        mean_divergence_tick: (!ticks.is_empty())
            .then(|| ticks.iter().sum::<u64>() as f64 / ticks.len() as f64),
        mse: (mse_a, mse_b),
        mse_diff: diff,
        mse_diff_se: (var / n).sqrt(),
    })
}
