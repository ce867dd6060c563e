#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ncsim::sim::{prepare, PreparedScenario};
use ncsim::{CrmConfig, LoopConfig, NetworkScenario, PlantModel, SchedulerPolicy, Weights};

pub fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// Scalar loop `x⁺ = a x + u + w` with unit weights.
pub fn scalar_loop(name: &str, a: f64, rw: f64, r0: f64, x0: f64, horizon: usize, policy: SchedulerPolicy) -> LoopConfig {
    LoopConfig {
        name: name.into(),
        group: name.into(),
        plant: PlantModel::new(scalar(a), scalar(1.0), scalar(rw), scalar(r0), DVector::from_element(1, x0), 1)
            .unwrap(),
        scheduler: policy,
        horizon,
        weights: Weights::identity(1, 1),
        sensor: None,
    }
}

pub fn single(config: LoopConfig) -> PreparedScenario {
    prepare(NetworkScenario::new(vec![config], vec![], CrmConfig::ideal()).unwrap()).unwrap()
}

pub fn network(configs: Vec<LoopConfig>, crm: CrmConfig) -> PreparedScenario {
    prepare(NetworkScenario::new(configs, vec![], crm).unwrap()).unwrap()
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Estimation error at the last step of every maximal run of undelivered
/// samples, i.e. the noise accumulated since the last delivery.
pub fn burst_errors(trace: &ncsim::sim::LoopTrace) -> Vec<f64> {
    let mut out = Vec::new();
    let steps = &trace.steps;
    for (i, s) in steps.iter().enumerate() {
        let ends_burst = !s.delta && steps.get(i + 1).is_none_or(|n| n.delta);
        if ends_burst {
            out.push(s.error()[0]);
        }
    }
    out
}

/// Mean squared error of `x̂ + c` on undelivered steps and `x̂` elsewhere,
/// over every loop and step in `episodes`.
pub fn offset_mse(episodes: &[ncsim::sim::EpisodeResult], offset: f64) -> f64 {
    let (sum, n) = episodes
        .iter()
        .flat_map(|e| &e.loops)
        .flat_map(|l| &l.steps)
        .fold((0.0, 0usize), |(s, n), st| {
            let shift = if st.delta { 0.0 } else { offset };
            (s + (st.error()[0] - shift).powi(2), n + 1)
        });
    sum / n as f64
}

/// Standard deviation of the error over undelivered steps.
pub fn silent_error_sd(episodes: &[ncsim::sim::EpisodeResult]) -> f64 {
    let errs: Vec<f64> = episodes
        .iter()
        .flat_map(|e| &e.loops)
        .flat_map(|l| &l.steps)
        .filter(|s| !s.delta)
        .map(|s| s.error()[0])
        .collect();
    let n = errs.len() as f64;
    let m = errs.iter().sum::<f64>() / n;
    (errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Common-random-number Monte Carlo of the two-step cost with `x0` delivered,
/// evaluated on a grid of first controls.
pub struct TwoStepOracle {
    pub grid: Vec<f64>,
    pub means: Vec<f64>,
    pub argmin: usize,
    /// Standard error of `V(u) - V(u_argmin)` over paired samples.
    pub paired_se: Vec<f64>,
}

impl TwoStepOracle {
    /// Grid points whose cost is within `k` paired standard errors of the
    /// minimum.
    pub fn near_optimal(&self, k: f64) -> Vec<f64> {
        let best = self.means[self.argmin];
        self.grid
            .iter()
            .zip(&self.means)
            .zip(&self.paired_se)
            .filter(|((_, m), se)| **m - best <= k * **se)
            .map(|((u, _), _)| *u)
            .collect()
    }
}

fn std_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

fn std_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Realized two-step cost (without the `x0` term) for one noise pair.
pub fn two_step_sample_cost(p: &ncsim::estimation::TwoStepProblem, x0: f64, u0: f64, w0: f64, w1: f64) -> f64 {
    let sd = p.w_var.sqrt();
    let m = p.a * x0 + p.b * u0;
    let x1 = m + sd * w0;
    let gain = p.a * p.b * p.q0 / (p.q2 + p.b * p.b * p.q0);
    let xhat = if x1 >= p.threshold {
        x1
    } else {
        let c = (p.threshold - m) / sd;
        m - sd * std_pdf(c) / std_cdf(c)
    };
    let u1 = -gain * xhat;
    let x2 = p.a * x1 + p.b * u1 + sd * w1;
    p.q2 * u0 * u0 + p.q1 * x1 * x1 + p.q2 * u1 * u1 + p.q0 * x2 * x2
}

pub fn two_step_oracle(p: &ncsim::estimation::TwoStepProblem, x0: f64, grid: Vec<f64>, samples: usize, seed: u64) -> TwoStepOracle {
    use rand::Rng;
    use rayon::prelude::*;
    let mut rng = ncsim::RngStream::new(seed).rng();
    let noise: Vec<(f64, f64)> = (0..samples)
        .map(|_| (rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal)))
        .collect();
    let cost_at = |u: f64| -> Vec<f64> { noise.iter().map(|&(a, b)| two_step_sample_cost(p, x0, u, a, b)).collect() };
    let means: Vec<f64> = grid
        .par_iter()
        .map(|&u| noise.iter().map(|&(a, b)| two_step_sample_cost(p, x0, u, a, b)).sum::<f64>() / samples as f64)
        .collect();
    let argmin = (0..grid.len()).min_by(|&i, &j| means[i].total_cmp(&means[j])).unwrap();
    let best = cost_at(grid[argmin]);
    let paired_se = grid
        .par_iter()
        .map(|&u| {
            let d: Vec<f64> = noise
                .iter()
                .zip(&best)
                .map(|(&(a, b), c)| two_step_sample_cost(p, x0, u, a, b) - c)
                .collect();
            mean_se(&d).1
        })
        .collect();
    TwoStepOracle { grid, means, argmin, paired_se }
}
