//! Contention resolution `δ_k = R(γ_k, n_k)`: p-persistent CSMA over a short
//! window of synchronized mini-slots, plus exogenous traffic sources.
//!
//! Every contender draws its own uniform per mini-slot from a stream keyed by
//! its id, so the randomness a contender sees does not depend on who else is
//! contending.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub type ContenderId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct CrmConfig {
    /// `p^{(r)}` for attempt `r = 1..=max_attempts`.
    pub persistence: Vec<f64>,
    pub max_attempts: usize,
    /// Mini-slots available before the next sampling instant.
    pub slots_per_sample: usize,
}

impl CrmConfig {
    pub fn new(persistence: Vec<f64>, max_attempts: usize, slots_per_sample: usize) -> Result<Self> {
        let c = Self {
            persistence,
            max_attempts,
            slots_per_sample,
        };
        c.validate()?;
        Ok(c)
    }

    /// `slots_per_sample = max_attempts = persistence.len()`.
    pub fn with_persistence(persistence: Vec<f64>) -> Result<Self> {
        let n = persistence.len();
        Self::new(persistence, n, n)
    }

    /// A single always-transmitting slot: a lone contender always succeeds.
    pub fn ideal() -> Self {
        Self {
            persistence: vec![1.0],
            max_attempts: 1,
            slots_per_sample: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.persistence.is_empty() {
            return Err(Error::Config("persistence list is empty".into()));
        }
        if let Some(p) = self.persistence.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("persistence probability {p} outside [0, 1]")));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        if self.persistence.len() < self.max_attempts {
            return Err(Error::Config(format!(
                "persistence list has {} entries but max_attempts is {}",
                self.persistence.len(),
                self.max_attempts
            )));
        }
        if self.slots_per_sample < self.max_attempts {
            return Err(Error::Config(format!(
                "slots_per_sample ({}) must be at least max_attempts ({})",
                self.slots_per_sample, self.max_attempts
            )));
        }
        Ok(())
    }

    fn persistence_for(&self, attempt: usize) -> f64 {
        self.persistence[attempt - 1]
    }
}

/// Per-contender result of one mini-slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotResult {
    Success,
    Collided,
    Deferred,
    Dropped,
}

impl SlotResult {
    pub fn as_str(&self) -> &'static str {
        match self {
            SlotResult::Success => "success",
            SlotResult::Collided => "collided",
            SlotResult::Deferred => "deferred",
            SlotResult::Dropped => "dropped",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotEvent {
    pub slot: usize,
    pub contender: ContenderId,
    pub attempt: usize,
    pub result: SlotResult,
}

/// Final fate of one contender's packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContenderOutcome {
    pub contender: ContenderId,
    pub delivered: bool,
    /// Transmissions made.
    pub transmissions: usize,
    pub collisions: usize,
    /// Mini-slot of the success.
    pub slot: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotOutcome {
    pub outcomes: Vec<ContenderOutcome>,
    pub events: Vec<SlotEvent>,
    pub successes_per_slot: Vec<usize>,
}

impl SlotOutcome {
    pub fn outcome(&self, id: ContenderId) -> Option<&ContenderOutcome> {
        self.outcomes.iter().find(|o| o.contender == id)
    }

    /// `δ` for a contender; non-contenders get `false`.
    pub fn delta(&self, id: ContenderId) -> bool {
        self.outcome(id).is_some_and(|o| o.delivered)
    }
}

struct Pending {
    id: ContenderId,
    attempt: usize,
    transmissions: usize,
    collisions: usize,
    draws: Vec<f64>,
}

/// Runs one contention window for `requests`. `stream` identifies the window
/// (episode and tick); contender `c` draws from `stream.substream(c)`.
pub fn resolve_contention(
    requests: &[ContenderId],
    crm: &CrmConfig,
    stream: &RngStream,
) -> Result<SlotOutcome> {
    crm.validate()?;
    let mut ids = requests.to_vec();
    ids.sort_unstable();
    ids.dedup();

    let mut pending: Vec<Pending> = ids
        .iter()
        .map(|&id| {
            let mut rng = stream.substream(id as u64).rng();
            Pending {
                id,
                attempt: 1,
                transmissions: 0,
                collisions: 0,
                draws: (0..crm.slots_per_sample).map(|_| rng.random::<f64>()).collect(),
            }
        })
        .collect();

    let mut out = SlotOutcome {
        successes_per_slot: vec![0; crm.slots_per_sample],
        ..SlotOutcome::default()
    };

    for slot in 0..crm.slots_per_sample {
        if pending.is_empty() {
            break;
        }
        let transmitting: Vec<bool> = pending
            .iter()
            .map(|p| p.draws[slot] < crm.persistence_for(p.attempt))
            .collect();
        let count = transmitting.iter().filter(|t| **t).count();
        let mut keep = Vec::with_capacity(pending.len());
        for (mut p, tx) in pending.into_iter().zip(transmitting) {
            if !tx {
                out.events.push(SlotEvent {
                    slot,
                    contender: p.id,
                    attempt: p.attempt,
                    result: SlotResult::Deferred,
                });
                keep.push(p);
                continue;
            }
            p.transmissions += 1;
            if count == 1 {
                out.events.push(SlotEvent {
                    slot,
                    contender: p.id,
                    attempt: p.attempt,
                    result: SlotResult::Success,
                });
                out.successes_per_slot[slot] += 1;
                out.outcomes.push(ContenderOutcome {
                    contender: p.id,
                    delivered: true,
                    transmissions: p.transmissions,
                    collisions: p.collisions,
                    slot: Some(slot),
                });
                continue;
            }
            out.events.push(SlotEvent {
                slot,
                contender: p.id,
                attempt: p.attempt,
                result: SlotResult::Collided,
            });
            p.collisions += 1;
            p.attempt += 1;
            if p.attempt > crm.max_attempts {
                out.events.push(SlotEvent {
                    slot,
                    contender: p.id,
                    attempt: p.attempt - 1,
                    result: SlotResult::Dropped,
                });
                out.outcomes.push(dropped(&p));
            } else {
                keep.push(p);
            }
        }
        pending = keep;
    }
    let last = crm.slots_per_sample - 1;
    for p in pending {
        out.events.push(SlotEvent {
            slot: last,
            contender: p.id,
            attempt: p.attempt,
            result: SlotResult::Dropped,
        });
        out.outcomes.push(dropped(&p));
    }
    out.outcomes.sort_by_key(|o| o.contender);
    Ok(out)
}

fn dropped(p: &Pending) -> ContenderOutcome {
    ContenderOutcome {
        contender: p.id,
        delivered: false,
        transmissions: p.transmissions,
        collisions: p.collisions,
        slot: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrafficSource {
    /// Active with probability `rate` each tick, independently.
    BernoulliIid { rate: f64 },
    /// Two-state chain: off→on with `p_on`, on→off with `p_off`.
    MarkovOnOff { p_on: f64, p_off: f64 },
}

impl TrafficSource {
    pub fn validate(&self) -> Result<()> {
        let probs: &[f64] = match self {
            TrafficSource::BernoulliIid { rate } => &[*rate],
            TrafficSource::MarkovOnOff { p_on, p_off } => &[*p_on, *p_off],
        };
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("traffic probability {p} outside [0, 1]")));
        }
        Ok(())
    }

    /// Long-run fraction of active ticks.
    pub fn stationary_activity(&self) -> f64 {
        match self {
            TrafficSource::BernoulliIid { rate } => *rate,
            TrafficSource::MarkovOnOff { p_on, p_off } => {
                if p_on + p_off == 0.0 {
                    0.0
                } else {
                    p_on / (p_on + p_off)
                }
            }
        }
    }
}

/// Per-source state carried between ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrafficState {
    pub active: bool,
    started: bool,
}

/// Advances a source by one tick and returns `n` for that tick.
///
/// A Markov source starts from its stationary distribution.
pub fn traffic_step<R: Rng + ?Sized>(
    source: &TrafficSource,
    state: &mut TrafficState,
    rng: &mut R,
) -> bool {
    let u: f64 = rng.random();
    state.active = match source {
        TrafficSource::BernoulliIid { rate } => u < *rate,
        TrafficSource::MarkovOnOff { p_on, p_off } => {
            if !state.started {
                u < source.stationary_activity()
            } else if state.active {
                u >= *p_off
            } else {
                u < *p_on
            }
        }
    };
    state.started = true;
    state.active
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRole;
    use proptest::prelude::*;

    fn example_crm() -> CrmConfig {
        CrmConfig::with_persistence(vec![1.0, 0.75, 0.5]).unwrap()
    }

    fn stream(seed: u64) -> RngStream {
        RngStream::new(seed).role(StreamRole::Contention)
    }

    #[test]
    fn lone_contender_succeeds_first_slot() {
        let out = resolve_contention(&[4], &example_crm(), &stream(1)).unwrap();
        assert!(out.delta(4));
        assert_eq!(out.outcome(4).unwrap().slot, Some(0));
        assert_eq!(out.successes_per_slot, vec![1, 0, 0]);
    }

    #[test]
    fn simultaneous_first_attempts_collide() {
        for seed in 0..50 {
            let out = resolve_contention(&[0, 1], &example_crm(), &stream(seed)).unwrap();
            let first: Vec<_> = out.events.iter().filter(|e| e.slot == 0).collect();
            assert_eq!(first.len(), 2);
            assert!(first.iter().all(|e| e.result == SlotResult::Collided && e.attempt == 1));
            assert!(out.successes_per_slot[0] == 0);
        }
    }

    #[test]
    fn empty_window_is_idle() {
        let out = resolve_contention(&[], &example_crm(), &stream(1)).unwrap();
        assert!(out.outcomes.is_empty());
        assert!(out.events.is_empty());
        assert!(!out.delta(0));
    }

    #[test]
    fn config_validation() {
        assert!(CrmConfig::with_persistence(vec![]).is_err());
        assert!(CrmConfig::with_persistence(vec![1.2]).is_err());
        assert!(CrmConfig::new(vec![1.0, 0.5], 2, 1).is_err());
        assert!(CrmConfig::new(vec![1.0], 0, 1).is_err());
        let bad = CrmConfig {
            persistence: vec![],
            max_attempts: 1,
            slots_per_sample: 1,
        };
        assert!(matches!(resolve_contention(&[0], &bad, &stream(0)), Err(Error::Config(_))));
    }

    #[test]
    fn attempts_beyond_limit_are_dropped() {
        // Two contenders that always transmit collide until both give up.
        let crm = CrmConfig::new(vec![1.0, 1.0], 2, 4).unwrap();
        let out = resolve_contention(&[0, 1], &crm, &stream(3)).unwrap();
        assert!(!out.delta(0) && !out.delta(1));
        assert_eq!(out.outcome(0).unwrap().transmissions, 2);
        let drops = out.events.iter().filter(|e| e.result == SlotResult::Dropped).count();
        assert_eq!(drops, 2);
        assert!(out.events.iter().all(|e| e.slot < 2));
    }

    #[test]
    fn deterministic_given_stream() {
        let a = resolve_contention(&[0, 1, 2, 5], &example_crm(), &stream(9)).unwrap();
        let b = resolve_contention(&[5, 2, 1, 0], &example_crm(), &stream(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bernoulli_extremes() {
        let mut rng = RngStream::new(1).rng();
        let mut st = TrafficState::default();
        let off = TrafficSource::BernoulliIid { rate: 0.0 };
        let on = TrafficSource::BernoulliIid { rate: 1.0 };
        assert!((0..1000).all(|_| !traffic_step(&off, &mut st, &mut rng)));
        assert!((0..1000).all(|_| traffic_step(&on, &mut st, &mut rng)));
    }

    #[test]
    fn markov_long_run_fraction() {
        let src = TrafficSource::MarkovOnOff { p_on: 0.2, p_off: 0.5 };
        let mut rng = RngStream::new(77).role(StreamRole::Traffic).rng();
        let mut st = TrafficState::default();
        let n = 1_000_000;
        let ones = (0..n).filter(|_| traffic_step(&src, &mut st, &mut rng)).count();
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.2 / 0.7).abs() < 0.01, "{frac}");
    }

    proptest! {
        #[test]
        fn at_most_one_success_per_slot(
            n in 0usize..25, seed in any::<u64>(), p2 in 0.0f64..=1.0, p3 in 0.0f64..=1.0,
        ) {
            let crm = CrmConfig::with_persistence(vec![1.0, p2, p3]).unwrap();
            let ids: Vec<usize> = (0..n).collect();
            let out = resolve_contention(&ids, &crm, &stream(seed)).unwrap();
            prop_assert!(out.successes_per_slot.iter().all(|s| *s <= 1));
            prop_assert_eq!(out.outcomes.len(), n);
            for o in &out.outcomes {
                let succ = out.events.iter().any(|e| e.contender == o.contender && e.result == SlotResult::Success);
                prop_assert_eq!(o.delivered, succ);
            }
        }

        #[test]
        fn adding_a_contender_never_helps_others(
            n in 1usize..12, extra in 0usize..16, seed in any::<u64>(),
            p2 in 0.0f64..=1.0, p3 in 0.0f64..=1.0, slots in 3usize..6,
        ) {
            let crm = CrmConfig::new(vec![1.0, p2, p3], 3, slots).unwrap();
            let base: Vec<usize> = (0..n).collect();
            let newcomer = n + extra;
            let mut more = base.clone();
            more.push(newcomer);
            let before = resolve_contention(&base, &crm, &stream(seed)).unwrap();
            let after = resolve_contention(&more, &crm, &stream(seed)).unwrap();
            for id in base {
                prop_assert!(!(after.delta(id) && !before.delta(id)), "contender {} helped", id);
            }
        }
    }
}
