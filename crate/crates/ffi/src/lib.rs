//! C ABI over `ncsim`.
//!
//! Every function returns an [`NcsStatus`]; on failure the message is
//! available from [`ncs_last_error`] on the same thread. Handles are opaque
//! and owned by the caller, who releases them with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use ncsim::control::{riccati_backward, two_step_u0_optimal};
use ncsim::estimation::TwoStepProblem;
use ncsim::scenario::{parse_scenario, parse_scenario_str, LoadedScenario};
use ncsim::sim::{monte_carlo, parse_grid, prepare, sweep_threshold, ControlLaw, MonteCarloResult, PreparedScenario, SweepResult};
use ncsim::stats::{truncated_moments, TruncatedGaussian};
use ncsim::{Error, Weights};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Dimension = 4,
    Parse = 5,
    Numerical = 6,
    Io = 7,
    OutOfRange = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcsControlLaw {
    Lqg = 0,
    Zero = 1,
}

/// Parsed and prepared scenario.
pub struct NcsScenario {
    loaded_seed: Option<u64>,
    loaded_episodes: Option<usize>,
    prepared: PreparedScenario,
}

/// Result of a Monte Carlo run.
pub struct NcsReport {
    result: MonteCarloResult,
}

/// Result of a threshold sweep.
pub struct NcsSweep {
    result: SweepResult,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NcsCostSummary {
    pub episodes: u64,
    pub j_mean: f64,
    /// NaN with a single episode.
    pub j_se: f64,
    pub transmissions_mean: f64,
    /// NaN when the closed form does not apply.
    pub jdp: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NcsNetworkSummary {
    pub samples: u64,
    pub requests: u64,
    pub deliveries: u64,
    pub collision_rate: f64,
    pub drop_rate: f64,
    /// NaN when no loop has a threshold scheduler.
    pub bound_probability: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NcsSweepRow {
    pub epsilon: f64,
    pub j_mean: f64,
    pub j_se: f64,
    pub bound_probability: f64,
    pub request_rate: f64,
    pub delivery_rate: f64,
    pub collision_rate: f64,
    pub drop_rate: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NcsMoments {
    pub mean: f64,
    pub variance: f64,
    pub probability: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NcsTwoStep {
    pub u0_optimal: f64,
    pub u0_ce: f64,
    pub residual_at_ce: f64,
    pub xhat00: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(NcsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) | Error::Protocol(_) => NcsStatus::Config,
            Error::Dimension(_) => NcsStatus::Dimension,
            Error::Parse(_) => NcsStatus::Parse,
            Error::Numerical(_)
            | Error::DegenerateTruncation(_)
            | Error::Bracket { .. }
            | Error::InfeasibleConditioning(_) => NcsStatus::Numerical,
            Error::Io(_) | Error::Csv(_) => NcsStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> NcsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            NcsStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            NcsStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller guarantees a non-null pointer refers to a live value.
    unsafe { p.as_ref() }.ok_or_else(|| Failure(NcsStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: as above, and the caller owns the pointee exclusively.
    unsafe { p.as_mut() }.ok_or_else(|| Failure(NcsStatus::NullPointer, format!("{what} is null")))
}

fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(NcsStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and NUL-terminated by contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(NcsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn or_nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn ncs_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ncs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn store_scenario(loaded: LoadedScenario, out: *mut *mut NcsScenario) -> Result<(), Failure> {
    let out = out_ptr(out, "out")?;
    let prepared = prepare(loaded.scenario)?;
    *out = Box::into_raw(Box::new(NcsScenario {
        loaded_seed: loaded.seed,
        loaded_episodes: loaded.episodes,
        prepared,
    }));
    Ok(())
}

/// Loads a preset name or a TOML file path.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_scenario_load(name: *const c_char, out: *mut *mut NcsScenario) -> NcsStatus {
    guard(|| store_scenario(parse_scenario(c_str(name, "name")?)?, out))
}

/// Parses scenario TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_scenario_parse(toml: *const c_char, out: *mut *mut NcsScenario) -> NcsStatus {
    guard(|| store_scenario(parse_scenario_str(c_str(toml, "toml")?)?, out))
}

/// # Safety
/// `scenario` must come from `ncs_scenario_load`/`ncs_scenario_parse` and not
/// be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ncs_scenario_free(scenario: *mut NcsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_scenario_loop_count(scenario: *const NcsScenario, out: *mut u64) -> NcsStatus {
    guard(|| {
        let s = non_null(scenario, "scenario")?;
        *out_ptr(out, "out")? = s.prepared.scenario.loops.len() as u64;
        Ok(())
    })
}

fn seed_and_episodes(s: &NcsScenario, seed: u64, episodes: u64) -> (u64, usize) {
    let seed = if seed == 0 { s.loaded_seed.unwrap_or(1) } else { seed };
    let episodes = if episodes == 0 { s.loaded_episodes.unwrap_or(1000) } else { episodes as usize };
    (seed, episodes)
}

/// Monte Carlo run. A zero `seed` or `episodes` falls back to the scenario's
/// value, then to 1 and 1000.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_simulate(
    scenario: *const NcsScenario,
    seed: u64,
    episodes: u64,
    law: NcsControlLaw,
    out: *mut *mut NcsReport,
) -> NcsStatus {
    guard(|| {
        let s = non_null(scenario, "scenario")?;
        let out = out_ptr(out, "out")?;
        let (seed, episodes) = seed_and_episodes(s, seed, episodes);
        let law = match law {
            NcsControlLaw::Lqg => ControlLaw::Lqg,
            NcsControlLaw::Zero => ControlLaw::Zero,
        };
        let result = monte_carlo(&s.prepared, seed, episodes, law)?;
        *out = Box::into_raw(Box::new(NcsReport { result }));
        Ok(())
    })
}

/// # Safety
/// `report` must come from `ncs_simulate` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ncs_report_free(report: *mut NcsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

fn cost_summary(r: &ncsim::control::CostReport) -> NcsCostSummary {
    NcsCostSummary {
        episodes: r.episodes as u64,
        j_mean: r.j_mean,
        j_se: or_nan(r.j_se),
        transmissions_mean: r.transmissions_mean,
        jdp: or_nan(r.jdp),
    }
}

/// Cost averaged over every loop.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_report_overall(report: *const NcsReport, out: *mut NcsCostSummary) -> NcsStatus {
    guard(|| {
        let r = non_null(report, "report")?;
        *out_ptr(out, "out")? = cost_summary(&r.result.overall);
        Ok(())
    })
}

/// Cost of loop `index`, in scenario order.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_report_loop(report: *const NcsReport, index: u64, out: *mut NcsCostSummary) -> NcsStatus {
    guard(|| {
        let r = non_null(report, "report")?;
        let l = r.result.loops.get(index as usize).ok_or_else(|| {
            Failure(NcsStatus::OutOfRange, format!("loop {index} of {}", r.result.loops.len()))
        })?;
        *out_ptr(out, "out")? = cost_summary(&l.report);
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_report_network(report: *const NcsReport, out: *mut NcsNetworkSummary) -> NcsStatus {
    guard(|| {
        let n = &non_null(report, "report")?.result.network;
        *out_ptr(out, "out")? = NcsNetworkSummary {
            samples: n.samples,
            requests: n.requests,
            deliveries: n.deliveries,
            collision_rate: n.collision_rate(),
            drop_rate: n.drop_rate(),
            bound_probability: or_nan(n.bound_probability()),
        };
        Ok(())
    })
}

/// Threshold sweep over the inclusive grid `lo:hi:step`.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_sweep(
    scenario: *const NcsScenario,
    lo: f64,
    hi: f64,
    step: f64,
    seed: u64,
    episodes: u64,
    out: *mut *mut NcsSweep,
) -> NcsStatus {
    guard(|| {
        let s = non_null(scenario, "scenario")?;
        let out = out_ptr(out, "out")?;
        let grid = parse_grid(&format!("{lo}:{hi}:{step}"))?;
        let (seed, episodes) = seed_and_episodes(s, seed, episodes);
        let result = sweep_threshold(&s.prepared, &grid, seed, episodes)?;
        *out = Box::into_raw(Box::new(NcsSweep { result }));
        Ok(())
    })
}

/// # Safety
/// `sweep` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_sweep_len(sweep: *const NcsSweep, out: *mut u64) -> NcsStatus {
    guard(|| {
        *out_ptr(out, "out")? = non_null(sweep, "sweep")?.result.rows.len() as u64;
        Ok(())
    })
}

/// # Safety
/// `sweep` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_sweep_row(sweep: *const NcsSweep, index: u64, out: *mut NcsSweepRow) -> NcsStatus {
    guard(|| {
        let rows = &non_null(sweep, "sweep")?.result.rows;
        let r = rows
            .get(index as usize)
            .ok_or_else(|| Failure(NcsStatus::OutOfRange, format!("row {index} of {}", rows.len())))?;
        *out_ptr(out, "out")? = NcsSweepRow {
            epsilon: r.epsilon,
            j_mean: r.j_mean,
            j_se: or_nan(r.j_se),
            bound_probability: or_nan(r.bound_probability),
            request_rate: r.request_rate,
            delivery_rate: r.delivery_rate,
            collision_rate: r.collision_rate,
            drop_rate: r.drop_rate,
        };
        Ok(())
    })
}

/// # Safety
/// `sweep` must come from `ncs_sweep` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ncs_sweep_free(sweep: *mut NcsSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}

/// Scalar finite-horizon Riccati recursion. `s_out` receives `horizon + 1`
/// values `S_0..S_N` and `l_out` receives `horizon` gains `L_0..L_{N-1}`.
///
/// # Safety
/// `s_out` and `l_out` must point to arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ncs_riccati_scalar(
    a: f64,
    b: f64,
    q0: f64,
    q1: f64,
    q2: f64,
    horizon: u64,
    s_out: *mut f64,
    l_out: *mut f64,
) -> NcsStatus {
    guard(|| {
        if s_out.is_null() || l_out.is_null() {
            return Err(Failure(NcsStatus::NullPointer, "output array is null".into()));
        }
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        let weights = Weights::new(m(q0), m(q1), m(q2), 0.0)?;
        let ric = riccati_backward(&m(a), &m(b), &weights, horizon as usize)?;
        // SAFETY: lengths are part of the contract above.
        let s = std::slice::from_raw_parts_mut(s_out, ric.s.len());
        let l = std::slice::from_raw_parts_mut(l_out, ric.l.len());
        for (dst, src) in s.iter_mut().zip(&ric.s) {
            *dst = src[(0, 0)];
        }
        for (dst, src) in l.iter_mut().zip(&ric.l) {
            *dst = src[(0, 0)];
        }
        Ok(())
    })
}

/// Moments of `N(mean, variance)` conditioned on `X < upper`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_truncated_moments(mean: f64, variance: f64, upper: f64, out: *mut NcsMoments) -> NcsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = truncated_moments(&TruncatedGaussian::new(mean, variance, upper)?)?;
        *out = NcsMoments { mean: m.mean, variance: m.variance, probability: m.probability };
        Ok(())
    })
}

/// Optimal first control of the two-step problem with unit weights and
/// variances. `delivered` selects whether `x0` reached the controller.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ncs_two_step_u0(
    x0: f64,
    delivered: bool,
    threshold: f64,
    a: f64,
    b: f64,
    out: *mut NcsTwoStep,
) -> NcsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let p = TwoStepProblem { a, b, threshold, ..TwoStepProblem::default() };
        let sol = two_step_u0_optimal(&p, x0, delivered)?;
        *out = NcsTwoStep {
            u0_optimal: sol.u0_optimal,
            u0_ce: sol.u0_ce,
            residual_at_ce: sol.residual_at_ce,
            xhat00: sol.xhat00,
        };
        Ok(())
    })
}
