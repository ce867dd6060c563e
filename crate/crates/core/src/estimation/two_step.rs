use crate::error::{Error, Result};
use crate::stats::{
    conditional_moments_compound, truncated_moments, QuadratureSpec, TruncatedGaussian,
};

/// Scalar two-step problem with `x_0 ~ N(0, x0_var)`, `w_0, w_1 ~ N(0, w_var)`
/// and the scheduler `δ_k = 1` iff `x_k >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStepProblem {
    pub a: f64,
    pub b: f64,
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub threshold: f64,
    pub x0_var: f64,
    pub w_var: f64,
}

impl Default for TwoStepProblem {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            q0: 1.0,
            q1: 1.0,
            q2: 1.0,
            threshold: 0.5,
            x0_var: 1.0,
            w_var: 1.0,
        }
    }
}

impl TwoStepProblem {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.q0, self.q1, self.q2, self.x0_var, self.w_var]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.threshold.is_nan() {
            return Err(Error::Config("two-step parameters must be finite".into()));
        }
        if self.q0 < 0.0 || self.q1 < 0.0 {
            return Err(Error::Config("Q0 and Q1 must be nonnegative".into()));
        }
        if self.q2 <= 0.0 {
            return Err(Error::Config("Q2 must be positive definite".into()));
        }
        if self.x0_var <= 0.0 || self.w_var <= 0.0 {
            return Err(Error::Config("x0 and noise variances must be positive".into()));
        }
        Ok(())
    }

    /// `x_0 | x_0 < threshold`.
    pub fn silent_x0(&self) -> Result<TruncatedGaussian> {
        TruncatedGaussian::new(0.0, self.x0_var, self.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoStepBranch {
    pub delta0: bool,
    pub delta1: bool,
}

/// Controller-side conditional moments along one `(δ_0, δ_1)` branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStepPosterior {
    /// `x̂_{0|0}`: `x_0` itself if delivered, `E[x_0 | x_0 < threshold]` otherwise.
    pub xhat00: f64,
    /// `P_{0|0}`.
    pub p00: f64,
    /// `E[e_1 | δ_1 = 0, δ_0]` where `e_1` is the part of `x_1` unknown at
    /// `k = 0`; `None` when `x_1` is delivered.
    pub e_mean: Option<f64>,
    /// `P_{1|1}`.
    pub p11: f64,
    /// `Pr(δ_1 = 0 | I_0)`.
    pub silence_probability: f64,
}

/// Branch posterior for control `u0`. `x0` is the delivered state and is
/// ignored when `δ_0 = 0`.
pub fn two_step_posterior(
    problem: &TwoStepProblem,
    u0: f64,
    x0: f64,
    branch: TwoStepBranch,
) -> Result<TwoStepPosterior> {
    problem.validate()?;
    let TwoStepProblem { a, b, w_var, threshold, .. } = *problem;
    let q = QuadratureSpec::default();
    let (xhat00, p00) = if branch.delta0 {
        (x0, 0.0)
    } else {
        let m = truncated_moments(&problem.silent_x0()?)?;
        (m.mean, m.variance)
    };
    // Silence at k = 1 given what is known at k = 0.
    let (prob, e_mean, e_var) = if branch.delta0 {
        let tg = TruncatedGaussian::new(0.0, w_var, threshold - a * x0 - b * u0)?;
        let m = truncated_moments(&tg)?;
        (m.probability, m.mean, m.variance)
    } else {
        let m = conditional_moments_compound(a, &problem.silent_x0()?, w_var, threshold - b * u0, &q)?;
        (m.probability, m.mean, m.variance)
    };
    Ok(TwoStepPosterior {
        xhat00,
        p00,
        e_mean: (!branch.delta1).then_some(e_mean),
        p11: if branch.delta1 { 0.0 } else { e_var },
        silence_probability: prob,
    })
}
