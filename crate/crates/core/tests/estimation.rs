mod common;

use common::{burst_errors, mean_se, offset_mse, scalar_loop, silent_error_sd, single};
use ncsim::scenario::parse_scenario;
use ncsim::scheduling::Direction;
use ncsim::sim::{prepare, run_episode, EpisodeOptions, EpisodeResult, PreparedScenario};
use ncsim::SchedulerPolicy;
use rayon::prelude::*;

fn episodes(prepared: &PreparedScenario, seed: u64, n: u64) -> Vec<EpisodeResult> {
    (0..n)
        .into_par_iter()
        .map(|e| run_episode(prepared, seed, e, &EpisodeOptions::default()).unwrap())
        .collect()
}

#[test]
fn observer_beats_every_constant_offset_under_innovation_scheduling() {
    let prepared = prepare(parse_scenario("example3").unwrap().scenario).unwrap();
    let eps = episodes(&prepared, 17, 400);
    let base = offset_mse(&eps, 0.0);
    let sd = silent_error_sd(&eps);
    for c in [0.1, 0.5, 1.0] {
        for sign in [-1.0, 1.0] {
            let alt = offset_mse(&eps, sign * c * sd);
            assert!(base <= alt, "offset {}σ: {base} > {alt}", sign * c);
        }
    }
}

fn burst_samples(policy: SchedulerPolicy, seed: u64, episodes_n: u64) -> Vec<f64> {
    let prepared = single(scalar_loop("b", 1.0, 1.0, 1.0, 0.0, 500, policy));
    (0..episodes_n)
        .into_par_iter()
        .flat_map_iter(|e| {
            let ep = run_episode(&prepared, seed, e, &EpisodeOptions::default()).unwrap();
            burst_errors(&ep.loops[0])
        })
        .collect()
}

#[test]
fn accumulated_noise_is_zero_mean_under_symmetric_scheduling() {
    let samples = burst_samples(SchedulerPolicy::InnovationThreshold { epsilon: 2.0 }, 4, 600);
    assert!(samples.len() > 50_000, "{}", samples.len());
    let (m, se) = mean_se(&samples);
    assert!(m.abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn accumulated_noise_is_biased_under_half_line_scheduling() {
    let policy = SchedulerPolicy::HalfLineState { threshold: 0.5, direction: Direction::Above };
    let samples = burst_samples(policy, 4, 400);
    let (m, se) = mean_se(&samples);
    assert!(m < -5.0 * se, "{m} ± {se}");
}
