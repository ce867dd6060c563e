use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::control::{evaluate_cost, jdp_closed_form, CostReport, EpisodeCost};
use crate::error::{Error, Result};

use super::engine::{run_episode, ControlLaw, EpisodeOptions, PreparedScenario};

/// Request and delivery counts over all loops and episodes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NetworkStats {
    pub samples: u64,
    pub requests: u64,
    pub deliveries: u64,
    /// Requests that saw at least one collision.
    pub collided_requests: u64,
    /// Requests that were never delivered.
    pub dropped_requests: u64,
    /// Samples with the innovation inside the loop's threshold.
    pub bounded_samples: u64,
    /// Samples of loops whose scheduler has a threshold.
    pub thresholded_samples: u64,
}

impl NetworkStats {
    fn add(&mut self, o: &NetworkStats) {
        self.samples += o.samples;
        self.requests += o.requests;
        self.deliveries += o.deliveries;
        self.collided_requests += o.collided_requests;
        self.dropped_requests += o.dropped_requests;
        self.bounded_samples += o.bounded_samples;
        self.thresholded_samples += o.thresholded_samples;
    }

    fn ratio(num: u64, den: u64) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    /// `Σγ / samples`.
    pub fn request_rate(&self) -> f64 {
        Self::ratio(self.requests, self.samples)
    }

    /// `Σδ / samples`.
    pub fn delivery_rate(&self) -> f64 {
        Self::ratio(self.deliveries, self.samples)
    }

    pub fn collision_rate(&self) -> f64 {
        Self::ratio(self.collided_requests, self.requests)
    }

    pub fn drop_rate(&self) -> f64 {
        Self::ratio(self.dropped_requests, self.requests)
    }

    /// Empirical `Pr(‖x_k - x̂_{k|τ_{k-1}}‖² ≤ ε)`; `None` without thresholds.
    pub fn bound_probability(&self) -> Option<f64> {
        (self.thresholded_samples > 0)
            .then(|| Self::ratio(self.bounded_samples, self.thresholded_samples))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopSummary {
    pub index: usize,
    pub name: String,
    pub group: String,
    pub report: CostReport,
    pub network: NetworkStats,
}

/// Costs averaged over the loops of one group within each episode, then over
/// episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub group: String,
    pub loops: usize,
    pub report: CostReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub seed: u64,
    pub episodes: usize,
    pub loops: Vec<LoopSummary>,
    pub groups: Vec<GroupSummary>,
    /// Costs averaged over every loop within each episode.
    pub overall: CostReport,
    /// Per-episode cost averaged over every loop, in episode order.
    pub episode_costs: Vec<f64>,
    pub network: NetworkStats,
    pub max_successes_per_slot: usize,
}

struct EpisodeSummary {
    costs: Vec<EpisodeCost>,
    stats: Vec<NetworkStats>,
    /// Per loop, per step `x̃ x̃ᵀ`.
    error_outer: Vec<Vec<DMatrix<f64>>>,
    max_successes: usize,
}

fn summarize(prepared: &PreparedScenario, seed: u64, episode: u64, law: ControlLaw) -> Result<EpisodeSummary> {
    let options = EpisodeOptions { law, record_slots: false };
    let ep = run_episode(prepared, seed, episode, &options)?;
    let sc = &prepared.scenario;
    let mut costs = Vec::with_capacity(ep.loops.len());
    let mut stats = Vec::with_capacity(ep.loops.len());
    let mut error_outer = Vec::with_capacity(ep.loops.len());
    for (trace, cfg) in ep.loops.iter().zip(&sc.loops) {
        costs.push(evaluate_cost(trace, &cfg.weights)?);
        let eps = cfg.scheduler.epsilon();
        let mut st = NetworkStats::default();
        for s in &trace.steps {
            st.samples += 1;
            st.requests += u64::from(s.gamma);
            st.deliveries += u64::from(s.delta);
            st.collided_requests += u64::from(s.gamma && s.collisions > 0);
            st.dropped_requests += u64::from(s.gamma && !s.delta);
            if let Some(e) = eps {
                st.thresholded_samples += 1;
                st.bounded_samples += u64::from(s.innovation_sq <= e);
            }
        }
        stats.push(st);
        error_outer.push(
            trace
                .steps
                .iter()
                .map(|s| {
                    let e = s.error();
                    &e * e.transpose()
                })
                .collect(),
        );
    }
    Ok(EpisodeSummary {
        costs,
        stats,
        error_outer,
        max_successes: ep.max_successes_per_slot,
    })
}

fn average_costs(episodes: &[EpisodeSummary], members: &[usize]) -> Vec<EpisodeCost> {
    let n = members.len() as f64;
    episodes
        .iter()
        .map(|e| {
            let mut c = EpisodeCost { j: 0.0, transmissions: 0, j_lambda: 0.0 };
            for &i in members {
                c.j += e.costs[i].j;
                c.j_lambda += e.costs[i].j_lambda;
                c.transmissions += e.costs[i].transmissions;
            }
            c.j /= n;
            c.j_lambda /= n;
            c
        })
        .collect()
}

/// `CostReport` of per-episode averages, with the transmission count averaged
/// per loop rather than summed.
fn averaged_report(episodes: &[EpisodeSummary], members: &[usize], jdp: Option<f64>) -> Result<CostReport> {
    let mut report = CostReport::from_episodes(&average_costs(episodes, members), jdp)?;
    report.transmissions_mean /= members.len() as f64;
    Ok(report)
}

fn average_jdp(loops: &[LoopSummary], members: &[usize]) -> Option<f64> {
    let vals: Option<Vec<f64>> = members.iter().map(|&i| loops[i].report.jdp).collect();
    vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs `episodes` independent episodes in parallel and aggregates them in
/// episode order, so the result depends only on `(scenario, seed, episodes)`.
pub fn monte_carlo(
    prepared: &PreparedScenario,
    seed: u64,
    episodes: usize,
    law: ControlLaw,
) -> Result<MonteCarloResult> {
    if episodes == 0 {
        return Err(Error::Config("at least one episode is required".into()));
    }
    let summaries = (0..episodes as u64)
        .into_par_iter()
        .map(|e| summarize(prepared, seed, e, law))
        .collect::<Result<Vec<_>>>()?;

    let sc = &prepared.scenario;
    let mut loops = Vec::with_capacity(sc.loops.len());
    let mut network = NetworkStats::default();
    for (i, cfg) in sc.loops.iter().enumerate() {
        let costs: Vec<EpisodeCost> = summaries.iter().map(|s| s.costs[i]).collect();
        let mut stats = NetworkStats::default();
        for s in &summaries {
            stats.add(&s.stats[i]);
        }
        network.add(&stats);
        // The closed form holds for u = -L x̂ with the true state available to
        // the scheduler.
        let jdp = if law == ControlLaw::Lqg && cfg.sensor.is_none() {
            let n = cfg.plant.state_dim();
            let p_nn: Vec<DMatrix<f64>> = (0..cfg.horizon)
                .map(|k| {
                    summaries
                        .iter()
                        .fold(DMatrix::zeros(n, n), |acc, s| acc + &s.error_outer[i][k])
                        / episodes as f64
                })
                .collect();
            Some(jdp_closed_form(
                prepared.riccati(i),
                &cfg.plant.x0_mean,
                &cfg.plant.r0,
                &cfg.plant.rw,
                &p_nn,
            )?)
        } else {
            None
        };
        loops.push(LoopSummary {
            index: i,
            name: cfg.name.clone(),
            group: cfg.group.clone(),
            report: CostReport::from_episodes(&costs, jdp)?,
            network: stats,
        });
    }

    let mut groups = Vec::new();
    for g in sc.groups() {
        let members: Vec<usize> = sc
            .loops
            .iter()
            .enumerate()
            .filter(|(_, l)| l.group == g)
            .map(|(i, _)| i)
            .collect();
        let report = averaged_report(&summaries, &members, average_jdp(&loops, &members))?;
        groups.push(GroupSummary { group: g, loops: members.len(), report });
    }
    let all: Vec<usize> = (0..sc.loops.len()).collect();
    let overall = averaged_report(&summaries, &all, average_jdp(&loops, &all))?;
    let episode_costs = average_costs(&summaries, &all).iter().map(|c| c.j).collect();
    Ok(MonteCarloResult {
        seed,
        episodes,
        loops,
        groups,
        overall,
        episode_costs,
        network,
        max_successes_per_slot: summaries.iter().map(|s| s.max_successes).max().unwrap_or(0),
    })
}
