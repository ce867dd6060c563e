mod common;

use common::{network, scalar_loop, single};
use ncsim::control::evaluate_cost;
use ncsim::scenario::parse_scenario;
use ncsim::sim::{monte_carlo, prepare, run_episode, ControlLaw, EpisodeOptions};
use ncsim::network::SlotResult;
use ncsim::{CrmConfig, SchedulerPolicy, Weights};
use std::collections::HashMap;
use proptest::prelude::*;

#[test]
fn noiseless_always_transmit_rollout_costs_x0_s0_x0() {
    // w ≡ 0 and a known x0: cost must equal x0ᵀ S0 x0 = 1.6 for N = 2.
    let prepared = single(scalar_loop("lqr", 1.0, 0.0, 0.0, 1.0, 2, SchedulerPolicy::AlwaysTransmit));
    let ep = run_episode(&prepared, 1, 0, &EpisodeOptions::default()).unwrap();
    let cost = evaluate_cost(&ep.loops[0], &Weights::identity(1, 1)).unwrap();
    assert!((cost.j - 1.6).abs() < 1e-10, "{}", cost.j);
    assert_eq!(cost.transmissions, 2);
    let us: Vec<f64> = ep.loops[0].steps.iter().map(|s| s.u[0]).collect();
    assert!((us[0] + 0.6).abs() < 1e-12 && (us[1] + 0.2).abs() < 1e-12, "{us:?}");
}

#[test]
fn infinite_threshold_never_transmits() {
    let prepared = single(scalar_loop(
        "silent",
        1.0,
        1.0,
        1.0,
        0.0,
        10,
        SchedulerPolicy::InnovationThreshold { epsilon: f64::INFINITY },
    ));
    let mc = monte_carlo(&prepared, 3, 200, ControlLaw::Lqg).unwrap();
    assert_eq!(mc.network.requests, 0);
    assert_eq!(mc.network.deliveries, 0);
    assert_eq!(mc.loops[0].report.transmissions_mean, 0.0);
}

#[test]
fn two_contenders_never_both_succeed_in_a_slot() {
    let loops = (0..2)
        .map(|i| scalar_loop(&format!("L{i}"), 1.0, 1.0, 1.0, 0.0, 20, SchedulerPolicy::AlwaysTransmit))
        .collect();
    let prepared = network(loops, CrmConfig::with_persistence(vec![1.0, 0.75, 0.5]).unwrap());
    let opts = EpisodeOptions { law: ControlLaw::Lqg, record_slots: true };
    let mut first_slot_collisions = 0;
    for e in 0..200 {
        let ep = run_episode(&prepared, 11, e, &opts).unwrap();
        assert!(ep.max_successes_per_slot <= 1);
        let mut per_slot: HashMap<(u64, usize), usize> = HashMap::new();
        for entry in ep.slots.iter().filter(|s| s.event.result == SlotResult::Success) {
            *per_slot.entry((entry.tick, entry.event.slot)).or_default() += 1;
        }
        assert!(per_slot.values().all(|&n| n == 1), "episode {e}");
        first_slot_collisions += ep
            .slots
            .iter()
            .filter(|s| s.event.slot == 0 && s.event.result == SlotResult::Collided)
            .count();
    }
    // Both start with p = 1, so the first mini-slot always collides.
    assert_eq!(first_slot_collisions, 2 * 20 * 200);
}

#[test]
fn single_loop_on_ideal_channel_delivers_every_request() {
    let prepared = single(scalar_loop("one", 1.0, 1.0, 1.0, 0.0, 50, SchedulerPolicy::InnovationThreshold { epsilon: 1.0 }));
    for e in 0..100 {
        let ep = run_episode(&prepared, 5, e, &EpisodeOptions::default()).unwrap();
        for s in &ep.loops[0].steps {
            assert_eq!(s.delta, s.gamma);
        }
    }
}

#[test]
fn episode_is_a_pure_function_of_seed_and_index() {
    let prepared = prepare(parse_scenario("example1").unwrap().scenario).unwrap();
    let opts = EpisodeOptions { law: ControlLaw::Lqg, record_slots: true };
    let a = run_episode(&prepared, 99, 7, &opts).unwrap();
    let b = run_episode(&prepared, 99, 7, &opts).unwrap();
    assert_eq!(a, b);
    let c = run_episode(&prepared, 99, 8, &opts).unwrap();
    assert_ne!(a.loops[0].steps[0].x, c.loops[0].steps[0].x);
}

#[test]
fn monte_carlo_does_not_depend_on_thread_scheduling() {
    let prepared = prepare(parse_scenario("example3").unwrap().scenario).unwrap();
    let a = monte_carlo(&prepared, 21, 64, ControlLaw::Lqg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| monte_carlo(&prepared, 21, 64, ControlLaw::Lqg).unwrap());
    assert_eq!(a.overall, b.overall);
    assert_eq!(a.network, b.network);
}

#[test]
fn mixed_periods_sample_on_their_own_grid() {
    let prepared = prepare(parse_scenario("example1").unwrap().scenario).unwrap();
    let ep = run_episode(&prepared, 2, 0, &EpisodeOptions::default()).unwrap();
    for (l, cfg) in ep.loops.iter().zip(&prepared.scenario.loops) {
        assert_eq!(l.steps.len(), cfg.horizon);
        for (k, s) in l.steps.iter().enumerate() {
            assert_eq!(s.tick, k as u64 * u64::from(cfg.plant.period));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trace_invariants_hold(seed in any::<u64>(), episode in 0u64..1000, eps in 0.0f64..6.0) {
        let prepared = prepare(parse_scenario("example3").unwrap().scenario.with_epsilon(eps)).unwrap();
        let ep = run_episode(&prepared, seed, episode, &EpisodeOptions { law: ControlLaw::Lqg, record_slots: true }).unwrap();
        prop_assert!(ep.max_successes_per_slot <= 1);
        for (trace, cfg) in ep.loops.iter().zip(&prepared.scenario.loops) {
            let cost = evaluate_cost(trace, &cfg.weights).unwrap();
            let staged: f64 = trace.steps.iter().map(|s| s.stage_cost).sum::<f64>()
                + ep.terminal_costs[trace.loop_index];
            prop_assert!((cost.j - staged).abs() <= 1e-9 * cost.j.max(1.0));
            let mut tau = -1i64;
            for s in &trace.steps {
                // δ implies γ, and τ advances exactly on delivery.
                prop_assert!(!s.delta || s.gamma);
                tau = if s.delta { s.k as i64 } else { tau };
                prop_assert_eq!(s.tau, tau);
                prop_assert!(s.delay() >= 0 && s.delay() <= s.k as i64 + 1);
                if s.delta {
                    prop_assert_eq!(&s.xhat, &s.x);
                } else {
                    prop_assert_eq!(&s.xhat, &s.predicted);
                }
                if !s.gamma {
                    prop_assert!(s.innovation_sq <= eps);
                }
            }
        }
        let delivered: usize = ep.loops.iter().flat_map(|l| &l.steps).filter(|s| s.delta).count();
        let requested: usize = ep.loops.iter().flat_map(|l| &l.steps).filter(|s| s.gamma).count();
        prop_assert!(delivered <= requested);
    }
}
