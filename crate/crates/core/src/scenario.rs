//! TOML scenario files and the bundled presets.
//!
//! ```toml
//! seed = 7
//! episodes = 1000
//!
//! [crm]
//! persistence = [1.0, 0.75, 0.5]
//! slots = 3
//!
//! [[loop]]
//! name = "T1"
//! count = 6
//! a = 1.0
//! b = 1.0
//! rw = 1.0
//! r0 = 1.0
//! period = 10
//! horizon = 10
//! scheduler = { kind = "state", epsilon = 2.5 }
//! weights = { q0 = 1.0, q1 = 1.0, q2 = 1.0 }
//! ```
//!
//! Matrices are either a number (a 1x1 matrix) or an array of rows.

use serde::{Deserialize, Serialize};
use toml::Spanned;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{LoopConfig, NetworkScenario, PlantModel, SensorModel, Weights};
use crate::network::{CrmConfig, TrafficSource};
use crate::scheduling::{Direction, SchedulerPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    fn to_matrix(&self, what: &str) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Scalar(v) => Ok(DMatrix::from_element(1, 1, *v)),
            MatrixSpec::Rows(rows) => {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
                    return Err(Error::Dimension(format!("{what} must be a non-empty rectangular array")));
                }
                Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
            }
        }
    }

    fn from_matrix(m: &DMatrix<f64>) -> Self {
        if m.shape() == (1, 1) {
            MatrixSpec::Scalar(m[(0, 0)])
        } else {
            MatrixSpec::Rows(m.row_iter().map(|r| r.iter().copied().collect()).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Scalar(f64),
    Entries(Vec<f64>),
}

impl VectorSpec {
    fn to_vector(&self) -> DVector<f64> {
        match self {
            VectorSpec::Scalar(v) => DVector::from_element(1, *v),
            VectorSpec::Entries(v) => DVector::from_vec(v.clone()),
        }
    }

    fn from_vector(v: &DVector<f64>) -> Self {
        if v.len() == 1 {
            VectorSpec::Scalar(v[0])
        } else {
            VectorSpec::Entries(v.iter().copied().collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SchedulerSpec {
    Always,
    State { epsilon: f64 },
    Innovation { epsilon: f64 },
    HalfLine { threshold: f64, direction: DirectionSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionSpec {
    Above,
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub q0: MatrixSpec,
    pub q1: MatrixSpec,
    pub q2: MatrixSpec,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub lambda: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub c: MatrixSpec,
    pub rv: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopBlock {
    pub name: String,
    /// Defaults to the name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Number of identical loops, named `name-1`, `name-2`, … when above 1.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub count: usize,
    pub a: MatrixSpec,
    pub b: MatrixSpec,
    pub rw: MatrixSpec,
    pub r0: MatrixSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_mean: Option<VectorSpec>,
    #[serde(default = "one_u32")]
    pub period: u32,
    pub horizon: usize,
    pub scheduler: SchedulerSpec,
    pub weights: WeightsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor: Option<SensorSpec>,
}

fn one() -> usize {
    1
}

fn one_u32() -> u32 {
    1
}

fn is_one(v: &usize) -> bool {
    *v == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrmSpec {
    pub persistence: Vec<f64>,
    /// Defaults to the length of `persistence`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_attempts: Option<usize>,
    /// Mini-slots per sampling tick; defaults to `max_attempts`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slots: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    Bernoulli { rate: f64 },
    Markov { p_on: f64, p_off: f64 },
}

/// Raw file contents before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    pub crm: CrmSpec,
    #[serde(rename = "loop")]
    pub loops: Vec<Spanned<LoopBlock>>,
    #[serde(default, rename = "source", skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<SourceSpec>,
}

/// A validated scenario plus the run defaults stored with it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: NetworkScenario,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn build_loop(block: &LoopBlock, index: usize) -> Result<LoopConfig> {
    let a = block.a.to_matrix("a")?;
    let n = a.nrows();
    let plant = PlantModel::new(
        a,
        block.b.to_matrix("b")?,
        block.rw.to_matrix("rw")?,
        block.r0.to_matrix("r0")?,
        block
            .x0_mean
            .as_ref()
            .map_or_else(|| DVector::zeros(n), VectorSpec::to_vector),
        block.period,
    )?;
    let w = &block.weights;
    let weights = Weights::new(
        w.q0.to_matrix("q0")?,
        w.q1.to_matrix("q1")?,
        w.q2.to_matrix("q2")?,
        w.lambda,
    )?;
    let scheduler = match &block.scheduler {
        SchedulerSpec::Always => SchedulerPolicy::AlwaysTransmit,
        SchedulerSpec::State { epsilon } => SchedulerPolicy::StateThreshold { epsilon: *epsilon },
        SchedulerSpec::Innovation { epsilon } => SchedulerPolicy::InnovationThreshold { epsilon: *epsilon },
        SchedulerSpec::HalfLine { threshold, direction } => SchedulerPolicy::HalfLineState {
            threshold: *threshold,
            direction: match direction {
                DirectionSpec::Above => Direction::Above,
                DirectionSpec::Below => Direction::Below,
            },
        },
    };
    let sensor = block
        .sensor
        .as_ref()
        .map(|s| SensorModel::new(s.c.to_matrix("c")?, s.rv.to_matrix("rv")?, n))
        .transpose()?;
    let name = if block.count > 1 {
        format!("{}-{}", block.name, index + 1)
    } else {
        block.name.clone()
    };
    let cfg = LoopConfig {
        name,
        group: block.group.clone().unwrap_or_else(|| block.name.clone()),
        plant,
        scheduler,
        horizon: block.horizon,
        weights,
        sensor,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn with_location(err: Error, line: usize, name: &str) -> Error {
    let msg = format!("line {line}, loop {name:?}: {err}");
    match err {
        Error::Dimension(_) => Error::Dimension(msg),
        _ => Error::Config(msg),
    }
}

/// Parses and validates scenario text.
pub fn parse_scenario_str(text: &str) -> Result<LoadedScenario> {
    if text.trim().is_empty() {
        return Err(Error::Parse("scenario file is empty".into()));
    }
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let crm = CrmConfig::new(
        file.crm.persistence.clone(),
        file.crm.max_attempts.unwrap_or(file.crm.persistence.len()),
        file.crm
            .slots
            .unwrap_or_else(|| file.crm.max_attempts.unwrap_or(file.crm.persistence.len())),
    )?;
    let mut loops = Vec::new();
    for spanned in &file.loops {
        let line = line_of(text, spanned.span().start);
        let block = spanned.get_ref();
        if block.count == 0 {
            return Err(with_location(Error::Config("count must be positive".into()), line, &block.name));
        }
        for i in 0..block.count {
            loops.push(build_loop(block, i).map_err(|e| with_location(e, line, &block.name))?);
        }
    }
    let sources = file
        .sources
        .iter()
        .map(|s| match *s {
            SourceSpec::Bernoulli { rate } => TrafficSource::BernoulliIid { rate },
            SourceSpec::Markov { p_on, p_off } => TrafficSource::MarkovOnOff { p_on, p_off },
        })
        .collect();
    Ok(LoadedScenario {
        scenario: NetworkScenario::new(loops, sources, crm)?,
        seed: file.seed,
        episodes: file.episodes,
    })
}

/// Reads a preset name or a file path.
pub fn parse_scenario(path_or_preset: &str) -> Result<LoadedScenario> {
    if let Some(text) = preset(path_or_preset) {
        return parse_scenario_str(text);
    }
    let text = std::fs::read_to_string(path_or_preset)?;
    parse_scenario_str(&text)
}

/// Serializes a scenario so that parsing the output gives it back unchanged.
pub fn emit(scenario: &NetworkScenario) -> Result<String> {
    let mut loops = Vec::with_capacity(scenario.loops.len());
    for l in &scenario.loops {
        let scheduler = match &l.scheduler {
            SchedulerPolicy::AlwaysTransmit => SchedulerSpec::Always,
            SchedulerPolicy::StateThreshold { epsilon } => SchedulerSpec::State { epsilon: *epsilon },
            SchedulerPolicy::InnovationThreshold { epsilon } => SchedulerSpec::Innovation { epsilon: *epsilon },
            SchedulerPolicy::HalfLineState { threshold, direction } => SchedulerSpec::HalfLine {
                threshold: *threshold,
                direction: match direction {
                    Direction::Above => DirectionSpec::Above,
                    Direction::Below => DirectionSpec::Below,
                },
            },
            SchedulerPolicy::Symmetric(map) => {
                return Err(Error::Config(format!(
                    "loop {}: custom symmetric scheduler {:?} cannot be written to a file",
                    l.name,
                    map.name()
                )))
            }
        };
        loops.push(Spanned::new(
            0..0,
            LoopBlock {
                name: l.name.clone(),
                group: Some(l.group.clone()),
                count: 1,
                a: MatrixSpec::from_matrix(&l.plant.a),
                b: MatrixSpec::from_matrix(&l.plant.b),
                rw: MatrixSpec::from_matrix(&l.plant.rw),
                r0: MatrixSpec::from_matrix(&l.plant.r0),
                x0_mean: Some(VectorSpec::from_vector(&l.plant.x0_mean)),
                period: l.plant.period,
                horizon: l.horizon,
                scheduler,
                weights: WeightsSpec {
                    q0: MatrixSpec::from_matrix(&l.weights.q0),
                    q1: MatrixSpec::from_matrix(&l.weights.q1),
                    q2: MatrixSpec::from_matrix(&l.weights.q2),
                    lambda: l.weights.lambda,
                },
                sensor: l.sensor.as_ref().map(|s| SensorSpec {
                    c: MatrixSpec::from_matrix(&s.c),
                    rv: MatrixSpec::from_matrix(&s.rv),
                }),
            },
        ));
    }
    let file = ScenarioFile {
        seed: None,
        episodes: None,
        crm: CrmSpec {
            persistence: scenario.crm.persistence.clone(),
            max_attempts: Some(scenario.crm.max_attempts),
            slots: Some(scenario.crm.slots_per_sample),
        },
        loops,
        sources: scenario
            .sources
            .iter()
            .map(|s| match *s {
                TrafficSource::BernoulliIid { rate } => SourceSpec::Bernoulli { rate },
                TrafficSource::MarkovOnOff { p_on, p_off } => SourceSpec::Markov { p_on, p_off },
            })
            .collect(),
    };
    toml::to_string(&file).map_err(|e| Error::Parse(e.to_string()))
}

pub const PRESETS: [&str; 3] = ["example1", "example1-baseline", "example3"];

const EXAMPLE1: &str = include_str!("presets/example1.toml");
const EXAMPLE1_BASELINE: &str = include_str!("presets/example1_baseline.toml");
const EXAMPLE3: &str = include_str!("presets/example3.toml");

/// Bundled scenario text by name.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "example1" => Some(EXAMPLE1),
        "example1-baseline" => Some(EXAMPLE1_BASELINE),
        "example3" => Some(EXAMPLE3),
        _ => None,
    }
}
