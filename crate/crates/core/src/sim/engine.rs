use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;

use crate::control::{ce_control, riccati_backward, RiccatiSolution};
use crate::error::Result;
use crate::estimation::{observer_update, sensor_kf_step, ObserverState, SensorKf};
use crate::model::{GaussianSampler, NetworkScenario};
use crate::network::{resolve_contention, traffic_step, ContenderId, TrafficState};
use crate::rng::{RngStream, StreamRole};
use crate::scheduling::{decide, SchedulerInput};

use super::trace::{EpisodeResult, LoopTrace, SlotLogEntry, StepRecord};

/// Control law applied by every loop's controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlLaw {
    /// `u_k = -L_k x̂_{k|k}`.
    Lqg,
    /// `u_k = 0`.
    Zero,
    /// `u_k = -c L_k x̂_{k|k}`.
    Scaled(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOptions {
    pub law: ControlLaw,
    pub record_slots: bool,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            law: ControlLaw::Lqg,
            record_slots: false,
        }
    }
}

struct LoopModels {
    riccati: RiccatiSolution,
    x0: GaussianSampler,
    w: GaussianSampler,
    v: Option<GaussianSampler>,
}

/// Validated scenario with its Riccati gains and noise factors precomputed.
pub struct PreparedScenario {
    pub scenario: NetworkScenario,
    models: Vec<LoopModels>,
}

impl PreparedScenario {
    pub fn riccati(&self, loop_index: usize) -> &RiccatiSolution {
        &self.models[loop_index].riccati
    }

    /// Same gains and samplers with every threshold replaced.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        prepare(self.scenario.with_epsilon(epsilon))
    }
}

pub fn prepare(scenario: NetworkScenario) -> Result<PreparedScenario> {
    scenario.validate()?;
    let models = scenario
        .loops
        .iter()
        .map(|l| {
            Ok(LoopModels {
                riccati: riccati_backward(&l.plant.a, &l.plant.b, &l.weights, l.horizon)?,
                x0: GaussianSampler::new(&l.plant.r0)?,
                w: GaussianSampler::new(&l.plant.rw)?,
                v: l.sensor.as_ref().map(|s| GaussianSampler::new(&s.rv)).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedScenario { scenario, models })
}

struct LoopRuntime {
    x: DVector<f64>,
    observer: ObserverState,
    kf: Option<SensorKf>,
    u_prev: Option<DVector<f64>>,
    w_rng: ChaCha8Rng,
    v_rng: ChaCha8Rng,
    trace: LoopTrace,
    terminal_cost: f64,
}

struct Sampled {
    loop_index: usize,
    k: usize,
    y: DVector<f64>,
    predicted: DVector<f64>,
    innovation_sq: f64,
    gamma: bool,
}

/// Runs one episode. Within a global tick every sampling loop first decides
/// `γ`, then all requests and active sources contend, then each loop updates
/// its observer with the acknowledged `δ`, computes `u` and steps its plant.
pub fn run_episode(
    prepared: &PreparedScenario,
    seed: u64,
    episode: u64,
    options: &EpisodeOptions,
) -> Result<EpisodeResult> {
    let sc = &prepared.scenario;
    let base = RngStream::new(seed).episode(episode);
    let m = sc.loops.len();
    let mut loops: Vec<LoopRuntime> = sc
        .loops
        .iter()
        .zip(&prepared.models)
        .enumerate()
        .map(|(i, (l, models))| {
            let unit = base.unit(i as u64);
            let mut x0_rng = unit.role(StreamRole::InitialState).rng();
            let x = &l.plant.x0_mean + models.x0.sample(&mut x0_rng);
            LoopRuntime {
                x,
                observer: ObserverState::new(l.plant.x0_mean.clone()),
                kf: l
                    .sensor
                    .clone()
                    .map(|s| SensorKf::new(s, l.plant.x0_mean.clone(), l.plant.r0.clone())),
                u_prev: None,
                w_rng: unit.role(StreamRole::ProcessNoise).rng(),
                v_rng: unit.role(StreamRole::MeasurementNoise).rng(),
                trace: LoopTrace {
                    loop_index: i,
                    name: l.name.clone(),
                    group: l.group.clone(),
                    horizon: l.horizon,
                    steps: Vec::with_capacity(l.horizon),
                    terminal_state: None,
                },
                terminal_cost: 0.0,
            }
        })
        .collect();
    let mut sources: Vec<(TrafficState, ChaCha8Rng)> = (0..sc.sources.len())
        .map(|j| {
            let rng = base.unit((m + j) as u64).role(StreamRole::Traffic).rng();
            (TrafficState::default(), rng)
        })
        .collect();

    let mut slots = Vec::new();
    let mut max_successes = 0;
    let mut sampled: Vec<Sampled> = Vec::with_capacity(m);
    let mut requests: Vec<ContenderId> = Vec::with_capacity(m + sources.len());

    for tick in 0..sc.global_horizon {
        sampled.clear();
        requests.clear();
        for (i, (cfg, rt)) in sc.loops.iter().zip(loops.iter_mut()).enumerate() {
            let period = u64::from(cfg.plant.period);
            if tick % period != 0 || tick / period >= cfg.horizon as u64 {
                continue;
            }
            let k = (tick / period) as usize;
            let y = match (&mut rt.kf, &prepared.models[i].v) {
                (Some(kf), Some(v)) => {
                    let meas = &kf.sensor.c * &rt.x + v.sample(&mut rt.v_rng);
                    *kf = sensor_kf_step(kf, &meas, rt.u_prev.as_ref(), &cfg.plant)?;
                    kf.estimate.clone()
                }
                _ => rt.x.clone(),
            };
            let predicted = rt.observer.predict(&cfg.plant, rt.u_prev.as_ref())?;
            let input = SchedulerInput {
                state: &y,
                predicted: &predicted,
                k,
                tau_prev: rt.observer.tau,
            };
            let gamma = decide(&cfg.scheduler, &input)?;
            if gamma {
                requests.push(i);
            }
            sampled.push(Sampled {
                loop_index: i,
                k,
                innovation_sq: (&y - &predicted).norm_squared(),
                y,
                predicted,
                gamma,
            });
        }
        for (j, (src, (state, rng))) in sc.sources.iter().zip(sources.iter_mut()).enumerate() {
            if traffic_step(src, state, rng) {
                requests.push(m + j);
            }
        }
        if sampled.is_empty() {
            continue;
        }
        let outcome = if requests.is_empty() {
            None
        } else {
            let stream = base.unit(tick).role(StreamRole::Contention);
            let out = resolve_contention(&requests, &sc.crm, &stream)?;
            max_successes = max_successes.max(out.successes_per_slot.iter().copied().max().unwrap_or(0));
            if options.record_slots {
                slots.extend(out.events.iter().map(|&event| SlotLogEntry { tick, event }));
            }
            Some(out)
        };

        for s in sampled.drain(..) {
            let cfg = &sc.loops[s.loop_index];
            let models = &prepared.models[s.loop_index];
            let rt = &mut loops[s.loop_index];
            let (delta, attempts, collisions) = match outcome.as_ref().and_then(|o| o.outcome(s.loop_index)) {
                Some(o) if s.gamma => (o.delivered, o.transmissions, o.collisions),
                _ => (false, 0, 0),
            };
            let y = delta.then_some(&s.y);
            rt.observer = observer_update(&rt.observer, delta, y, rt.u_prev.as_ref(), &cfg.plant)?;
            let gain = &models.riccati.l[s.k];
            let u = match options.law {
                ControlLaw::Lqg => ce_control(gain, &rt.observer.filtered),
                ControlLaw::Zero => DVector::zeros(cfg.plant.input_dim()),
                ControlLaw::Scaled(c) => ce_control(gain, &rt.observer.filtered) * c,
            };
            let w = &cfg.weights;
            let stage_cost = (rt.x.transpose() * &w.q1 * &rt.x)[(0, 0)] + (u.transpose() * &w.q2 * &u)[(0, 0)];
            rt.trace.steps.push(StepRecord {
                k: s.k,
                tick,
                x: rt.x.clone(),
                u: u.clone(),
                gamma: s.gamma,
                delta,
                attempts,
                collisions,
                xhat: rt.observer.filtered.clone(),
                predicted: s.predicted,
                tau: rt.observer.tau,
                innovation_sq: s.innovation_sq,
                stage_cost,
            });
            let noise = models.w.sample(&mut rt.w_rng);
            rt.x = &cfg.plant.a * &rt.x + &cfg.plant.b * &u + noise;
            rt.u_prev = Some(u);
            if s.k + 1 == cfg.horizon {
                rt.terminal_cost = (rt.x.transpose() * &w.q0 * &rt.x)[(0, 0)];
                rt.trace.terminal_state = Some(rt.x.clone());
            }
        }
    }

    let terminal_costs = loops.iter().map(|l| l.terminal_cost).collect();
    Ok(EpisodeResult {
        episode,
        loops: loops.into_iter().map(|l| l.trace).collect(),
        slots,
        max_successes_per_slot: max_successes,
        terminal_costs,
    })
}
