use crate::error::{Error, Result};
use crate::model::Weights;
use crate::sim::LoopTrace;

/// Cost of a single episode of one loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeCost {
    /// `x_Nᵀ Q0 x_N + Σ (x_kᵀ Q1 x_k + u_kᵀ Q2 u_k)`.
    pub j: f64,
    /// `Σ δ_k`.
    pub transmissions: u64,
    /// `J + Λ Σ δ_k`.
    pub j_lambda: f64,
}

/// Re-accumulates the quadratic cost of a complete trace.
pub fn evaluate_cost(trace: &LoopTrace, weights: &Weights) -> Result<EpisodeCost> {
    if trace.steps.len() != trace.horizon {
        return Err(Error::Config(format!(
            "trace of loop {} has {} of {} steps",
            trace.name,
            trace.steps.len(),
            trace.horizon
        )));
    }
    let terminal = trace
        .terminal_state
        .as_ref()
        .ok_or_else(|| Error::Config(format!("trace of loop {} has no terminal state", trace.name)))?;
    let mut j = 0.0;
    let mut transmissions = 0;
    for s in &trace.steps {
        j += (s.x.transpose() * &weights.q1 * &s.x)[(0, 0)] + (s.u.transpose() * &weights.q2 * &s.u)[(0, 0)];
        transmissions += u64::from(s.delta);
    }
    j += (terminal.transpose() * &weights.q0 * terminal)[(0, 0)];
    Ok(EpisodeCost {
        j,
        transmissions,
        j_lambda: j + weights.lambda * transmissions as f64,
    })
}

/// Monte Carlo summary of per-episode costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub episodes: usize,
    pub j_mean: f64,
    /// `None` for a single episode.
    pub j_se: Option<f64>,
    pub transmissions_mean: f64,
    pub j_lambda_mean: f64,
    pub j_lambda_se: Option<f64>,
    /// Closed-form prediction from the empirical filtered error covariances.
    pub jdp: Option<f64>,
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (usize, f64, Option<f64>) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (n, mean, None);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (n, mean, Some((ss / (n as f64 - 1.0) / n as f64).sqrt()))
}

impl CostReport {
    pub fn from_episodes(costs: &[EpisodeCost], jdp: Option<f64>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::Config("cost report needs at least one episode".into()));
        }
        let (episodes, j_mean, j_se) = mean_se(costs.iter().map(|c| c.j));
        let (_, j_lambda_mean, j_lambda_se) = mean_se(costs.iter().map(|c| c.j_lambda));
        let transmissions_mean =
            costs.iter().map(|c| c.transmissions as f64).sum::<f64>() / episodes as f64;
        Ok(Self {
            episodes,
            j_mean,
            j_se,
            transmissions_mean,
            j_lambda_mean,
            j_lambda_se,
            jdp,
        })
    }

    /// Half-width of the normal-approximation 95% interval.
    pub fn ci95(&self) -> Option<f64> {
        self.j_se.map(|se| 1.96 * se)
    }
}
