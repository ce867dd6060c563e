//! CSV writers and the run manifest.
//!
//! Every file has a header row. Vector quantities are written row-major with
//! entries joined by `;`. Missing values are empty fields.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use csv::Writer;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::control::{RiccatiSolution, TwoStepSolution};
use crate::error::Result;
use crate::model::NetworkScenario;
use crate::sim::{EpisodeResult, MonteCarloResult, SweepResult};

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn joined<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| num(*v)).collect::<Vec<_>>().join(";")
}

fn vector(v: &DVector<f64>) -> String {
    joined(v.iter())
}

fn matrix(m: &DMatrix<f64>) -> String {
    let rows: Vec<f64> = m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect();
    joined(rows.iter())
}

fn writer(path: &Path) -> Result<Writer<File>> {
    Ok(Writer::from_path(path)?)
}

pub const SUMMARY_HEADER: [&str; 16] = [
    "loop",
    "name",
    "group",
    "episodes",
    "j_mean",
    "j_se",
    "j_ci95",
    "transmissions_mean",
    "j_lambda_mean",
    "j_lambda_se",
    "jdp",
    "request_rate",
    "delivery_rate",
    "collision_rate",
    "drop_rate",
    "bound_probability",
];

/// One row per loop.
pub fn write_summary(path: &Path, mc: &MonteCarloResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for l in &mc.loops {
        let r = &l.report;
        w.write_record([
            l.index.to_string(),
            l.name.clone(),
            l.group.clone(),
            r.episodes.to_string(),
            num(r.j_mean),
            opt(r.j_se),
            opt(r.ci95()),
            num(r.transmissions_mean),
            num(r.j_lambda_mean),
            opt(r.j_lambda_se),
            opt(r.jdp),
            num(l.network.request_rate()),
            num(l.network.delivery_rate()),
            num(l.network.collision_rate()),
            num(l.network.drop_rate()),
            opt(l.network.bound_probability()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per group, costs averaged over the group's loops.
pub fn write_groups(path: &Path, mc: &MonteCarloResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["group", "loops", "episodes", "j_mean", "j_se", "j_ci95", "transmissions_mean", "jdp"])?;
    for g in &mc.groups {
        let r = &g.report;
        w.write_record([
            g.group.clone(),
            g.loops.to_string(),
            r.episodes.to_string(),
            num(r.j_mean),
            opt(r.j_se),
            opt(r.ci95()),
            num(r.transmissions_mean),
            opt(r.jdp),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per threshold; the first two columns are the cost curve.
pub fn write_sweep(path: &Path, sweep: &SweepResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "epsilon",
        "j_mean",
        "j_se",
        "jdp",
        "bound_probability",
        "request_rate",
        "delivery_rate",
        "collision_rate",
        "drop_rate",
    ])?;
    for r in &sweep.rows {
        w.write_record([
            num(r.epsilon),
            num(r.j_mean),
            opt(r.j_se),
            opt(r.jdp),
            opt(r.bound_probability),
            num(r.request_rate),
            num(r.delivery_rate),
            num(r.collision_rate),
            num(r.drop_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const TRACE_HEADER: [&str; 18] = [
    "episode",
    "tick",
    "loop",
    "kind",
    "k",
    "x",
    "u",
    "gamma",
    "delta",
    "attempts",
    "collisions",
    "xhat",
    "err",
    "tau",
    "d",
    "innovation_sq",
    "stage_cost",
    "group",
];

/// One row per loop and sampling instant, plus a `terminal` row per loop
/// carrying `x_N` and `x_Nᵀ Q0 x_N` in `stage_cost`. Summing `stage_cost`
/// over a loop's rows gives its episode cost.
pub fn write_trace(path: &Path, episodes: &[EpisodeResult]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRACE_HEADER)?;
    for ep in episodes {
        for (trace, terminal_cost) in ep.loops.iter().zip(&ep.terminal_costs) {
            for s in &trace.steps {
                w.write_record([
                    ep.episode.to_string(),
                    s.tick.to_string(),
                    trace.loop_index.to_string(),
                    "step".into(),
                    s.k.to_string(),
                    vector(&s.x),
                    vector(&s.u),
                    u8::from(s.gamma).to_string(),
                    u8::from(s.delta).to_string(),
                    s.attempts.to_string(),
                    s.collisions.to_string(),
                    vector(&s.xhat),
                    vector(&s.error()),
                    s.tau.to_string(),
                    s.delay().to_string(),
                    num(s.innovation_sq),
                    num(s.stage_cost),
                    trace.group.clone(),
                ])?;
            }
            if let (Some(x), Some(last)) = (&trace.terminal_state, trace.steps.last()) {
                let period = trace.steps.get(1).map_or(1, |s| s.tick - trace.steps[0].tick);
                w.write_record([
                    ep.episode.to_string(),
                    (last.tick + period).to_string(),
                    trace.loop_index.to_string(),
                    "terminal".into(),
                    trace.horizon.to_string(),
                    vector(x),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    num(*terminal_cost),
                    trace.group.clone(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per contender per mini-slot event.
pub fn write_slots(path: &Path, episodes: &[EpisodeResult]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["episode", "tick", "slot", "contender", "attempt", "result"])?;
    for ep in episodes {
        for s in &ep.slots {
            w.write_record([
                ep.episode.to_string(),
                s.tick.to_string(),
                s.event.slot.to_string(),
                s.event.contender.to_string(),
                s.event.attempt.to_string(),
                s.event.result.as_str().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per `k = 0..=N`; `L` is empty at `k = N`.
pub fn write_riccati(path: &Path, ric: &RiccatiSolution) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["k", "S", "L"])?;
    for (k, s) in ric.s.iter().enumerate() {
        w.write_record([k.to_string(), matrix(s), ric.l.get(k).map(matrix).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per solved branch.
pub fn write_two_step(path: &Path, rows: &[(bool, f64, TwoStepSolution)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["delta0", "x0", "xhat00", "s1", "u0_ce", "u0_optimal", "residual_at_ce", "stationary_points"])?;
    for (delta0, x0, s) in rows {
        w.write_record([
            u8::from(*delta0).to_string(),
            num(*x0),
            num(s.xhat00),
            num(s.s1),
            num(s.u0_ce),
            num(s.u0_optimal),
            num(s.residual_at_ce),
            joined(s.stationary_points.iter()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Provenance written next to every set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the scenario re-serialized in canonical form.
    pub scenario_hash: Option<String>,
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub version: String,
    pub timestamp: String,
    pub outputs: Vec<PathBuf>,
}

pub fn scenario_hash(scenario: &NetworkScenario) -> Result<String> {
    let canonical = crate::scenario::emit(scenario)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            scenario_hash: None,
            seed: None,
            episodes: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        let text = serde_json::to_string_pretty(self).map_err(|e| crate::Error::Parse(e.to_string()))?;
        f.write_all(text.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}
