use crate::error::{Error, Result};

use super::engine::{ControlLaw, PreparedScenario};
use super::monte_carlo::monte_carlo;

/// One threshold of a sweep; costs are per loop, averaged over loops.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub j_mean: f64,
    pub j_se: Option<f64>,
    pub jdp: Option<f64>,
    pub bound_probability: Option<f64>,
    pub request_rate: f64,
    pub delivery_rate: f64,
    pub collision_rate: f64,
    pub drop_rate: f64,
    /// Per-episode cost averaged over loops; the same episode indices at
    /// every threshold.
    pub episode_costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub seed: u64,
    pub episodes: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Row with the lowest mean cost.
    pub fn argmin(&self) -> Option<&SweepRow> {
        self.rows.iter().min_by(|a, b| a.j_mean.total_cmp(&b.j_mean))
    }

    /// Mean and standard error of `J(rows[i]) - J(rows[j])` over paired
    /// episodes.
    pub fn paired_difference(&self, i: usize, j: usize) -> Option<(f64, f64)> {
        let (a, b) = (&self.rows.get(i)?.episode_costs, &self.rows.get(j)?.episode_costs);
        let n = a.len();
        if n < 2 || b.len() != n {
            return None;
        }
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Some((mean, (var / n as f64).sqrt()))
    }
}

/// Parses `lo:hi:step` into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Parse(format!("threshold grid must be lo:hi:step, got {spec:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !(lo.is_finite() && hi.is_finite() && step > 0.0 && step.is_finite()) || hi < lo {
        return Err(bad());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

/// Monte Carlo over each threshold with the same seed, so every grid point
/// sees the same noise realizations.
pub fn sweep_threshold(
    template: &PreparedScenario,
    grid: &[f64],
    seed: u64,
    episodes: usize,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Config("threshold grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &epsilon in grid {
        let prepared = template.with_epsilon(epsilon)?;
        let mc = monte_carlo(&prepared, seed, episodes, ControlLaw::Lqg)?;
        rows.push(SweepRow {
            epsilon,
            j_mean: mc.overall.j_mean,
            j_se: mc.overall.j_se,
            jdp: mc.overall.jdp,
            bound_probability: mc.network.bound_probability(),
            request_rate: mc.network.request_rate(),
            delivery_rate: mc.network.delivery_rate(),
            collision_rate: mc.network.collision_rate(),
            drop_rate: mc.network.drop_rate(),
            episode_costs: mc.episode_costs,
        });
    }
    Ok(SweepResult { seed, episodes, rows })
}
