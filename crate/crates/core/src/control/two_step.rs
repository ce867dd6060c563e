use crate::error::{Error, Result};
use crate::estimation::{two_step_posterior, TwoStepBranch, TwoStepProblem};
use crate::stats::{
    compound_density, conditional_moments_compound, find_root, normal_pdf, truncated_moments,
    QuadratureSpec, TruncatedGaussian,
};

const SCAN: (f64, f64) = (-10.0, 10.0);
const SCAN_STEP: f64 = 0.05;
const ROOT_TOL: f64 = 1e-12;

/// `u_1 = -abQ0 / (Q2 + b²Q0) x̂_{1|1}`.
pub fn two_step_u1(a: f64, b: f64, q0: f64, q2: f64, xhat11: f64) -> f64 {
    -(a * b * q0) / (q2 + b * b * q0) * xhat11
}

/// `S_1 = Q1 + a²Q0 - (abQ0)² / (Q2 + b²Q0)`.
pub fn two_step_s1(p: &TwoStepProblem) -> f64 {
    let TwoStepProblem { a, b, q0, q1, q2, .. } = *p;
    q1 + a * a * q0 - (a * b * q0).powi(2) / (q2 + b * b * q0)
}

/// Solves `2u_0 (Q2 + b²S_1) + 2 x̂_{0|0} a b S_1 = 0`.
pub fn ce_u0(a: f64, b: f64, s1: f64, q2: f64, xhat00: f64) -> f64 {
    -(a * b * s1) / (q2 + b * b * s1) * xhat00
}

/// `a²Q0²b² / (Q2 + b²Q0)`, the weight of `E[P_{1|1}]` in `V_0`.
fn dual_weight(p: &TwoStepProblem) -> f64 {
    let TwoStepProblem { a, b, q0, q2, .. } = *p;
    a * a * q0 * q0 * b * b / (q2 + b * b * q0)
}

/// `(m - m̄)² φ(m)` where `m` is the silence bound on the part of `x_1` unknown
/// at `k = 0`, `m̄` its conditional mean below `m` and `φ` its density. This is
/// the derivative of `E[P_{1|1}]` with respect to the bound.
fn bound_sensitivity(p: &TwoStepProblem, u0: f64, x0: f64, delta0: bool) -> Result<f64> {
    let q = QuadratureSpec::default();
    let degenerate_is_zero = |r: Result<f64>| match r {
        // No silent mass left: the term vanishes with the density.
        Err(Error::DegenerateTruncation(_)) => Ok(0.0),
        other => other,
    };
    if delta0 {
        let m = p.threshold - p.a * x0 - p.b * u0;
        degenerate_is_zero(TruncatedGaussian::new(0.0, p.w_var, m).and_then(|tg| {
            let w_bar = truncated_moments(&tg)?.mean;
            Ok((m - w_bar).powi(2) * normal_pdf(m, 0.0, p.w_var))
        }))
    } else {
        let m = p.threshold - p.b * u0;
        let tg = p.silent_x0()?;
        degenerate_is_zero(conditional_moments_compound(p.a, &tg, p.w_var, m, &q).and_then(|cm| {
            Ok((m - cm.mean).powi(2) * compound_density(p.a, &tg, p.w_var, m)?)
        }))
    }
}

/// `∂V_0/∂u_0` along branch `δ_0`; `x0` is ignored when `δ_0 = 0`. Without the
/// dual term this is the certainty-equivalent condition.
pub fn stationarity_residual(
    p: &TwoStepProblem,
    u0: f64,
    x0: f64,
    delta0: bool,
    include_dual: bool,
) -> Result<f64> {
    p.validate()?;
    let s1 = two_step_s1(p);
    let xhat00 = xhat00(p, x0, delta0)?;
    let mut r = 2.0 * u0 * (p.q2 + p.b * p.b * s1) + 2.0 * xhat00 * p.a * p.b * s1;
    if include_dual {
        r -= dual_weight(p) * p.b * bound_sensitivity(p, u0, x0, delta0)?;
    }
    Ok(r)
}

fn xhat00(p: &TwoStepProblem, x0: f64, delta0: bool) -> Result<f64> {
    if delta0 {
        Ok(x0)
    } else {
        Ok(truncated_moments(&p.silent_x0()?)?.mean)
    }
}

/// `V_0(u_0)` up to terms that do not depend on `u_0`:
/// `Q2 u_0² + S_1 (a x̂_{0|0} + b u_0)² + a²Q0²b²/(Q2 + b²Q0) E[P_{1|1}]`.
pub fn two_step_value(p: &TwoStepProblem, u0: f64, x0: f64, delta0: bool) -> Result<f64> {
    p.validate()?;
    let s1 = two_step_s1(p);
    let branch = TwoStepBranch { delta0, delta1: false };
    let expected_p11 = match two_step_posterior(p, u0, x0, branch) {
        Ok(post) => post.silence_probability * post.p11,
        Err(Error::DegenerateTruncation(_)) => 0.0,
        Err(e) => return Err(e),
    };
    let xhat = xhat00(p, x0, delta0)?;
    Ok(p.q2 * u0 * u0 + s1 * (p.a * xhat + p.b * u0).powi(2) + dual_weight(p) * expected_p11)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepSolution {
    pub u0_optimal: f64,
    pub u0_ce: f64,
    /// Full residual evaluated at the certainty-equivalent control.
    pub residual_at_ce: f64,
    pub s1: f64,
    pub xhat00: f64,
    /// Every stationary point found in the scan window.
    pub stationary_points: Vec<f64>,
}

/// Optimal `u_0` with dual effect: every stationary point in `[-10, 10]` is
/// located and the one with the lowest `V_0` is returned.
pub fn two_step_u0_optimal(p: &TwoStepProblem, x0: f64, delta0: bool) -> Result<TwoStepSolution> {
    p.validate()?;
    let s1 = two_step_s1(p);
    let xhat = xhat00(p, x0, delta0)?;
    let u0_ce = ce_u0(p.a, p.b, s1, p.q2, xhat);
    let residual_at_ce = stationarity_residual(p, u0_ce, x0, delta0, true)?;
    let f = |u: f64| stationarity_residual(p, u, x0, delta0, true);
    let steps = ((SCAN.1 - SCAN.0) / SCAN_STEP).round() as usize;
    let mut points = Vec::new();
    let mut prev_u = SCAN.0;
    let mut prev_r = f(prev_u)?;
    for i in 1..=steps {
        let u = SCAN.0 + i as f64 * SCAN_STEP;
        let r = f(u)?;
        if prev_r == 0.0 {
            points.push(prev_u);
        } else if prev_r.signum() != r.signum() && r != 0.0 {
            let failure = std::cell::RefCell::new(None);
            let root = find_root(
                |u| {
                    f(u).unwrap_or_else(|e| {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    })
                },
                prev_u,
                u,
                ROOT_TOL,
            )?;
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            points.push(root);
        }
        prev_u = u;
        prev_r = r;
    }
    if prev_r == 0.0 {
        points.push(prev_u);
    }
    let mut best: Option<(f64, f64)> = None;
    for &u in &points {
        let v = two_step_value(p, u, x0, delta0)?;
        if best.is_none_or(|(_, bv)| v < bv) {
            best = Some((u, v));
        }
    }
    let (u0_optimal, _) = best.ok_or(Error::Bracket {
        lo: SCAN.0,
        hi: SCAN.1,
    })?;
    Ok(TwoStepSolution {
        u0_optimal,
        u0_ce,
        residual_at_ce,
        s1,
        xhat00: xhat,
        stationary_points: points,
    })
}
