use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::PlantModel;
use crate::rng::RngStream;
use crate::scheduling::{decide, is_symmetric_control_free, SchedulerInput, SchedulerPolicy};

const MIN_ACCEPTANCE: f64 = 1e-6;

/// Rejection estimate of `E[Σ_{s=1}^{L} a^{s-1} w_{k-s} | no transmission at
/// k-L+1, …, k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurstEstimate {
    pub mean: f64,
    /// Zero when the mean is exact.
    pub std_error: f64,
    pub accepted: u64,
    pub proposals: u64,
}

/// Conditional mean of the noise accumulated over a non-transmission burst of
/// `burst_len` samples that starts right after a delivered sample equal to
/// `reset_state`. Controls are zero during the burst.
///
/// Symmetric control-free policies give exactly 0. Anything else is estimated
/// from `budget` rejection proposals drawn from `stream`.
pub fn general_estimate_burst(
    model: &PlantModel,
    policy: &SchedulerPolicy,
    burst_len: usize,
    reset_state: f64,
    budget: u64,
    stream: &RngStream,
) -> Result<BurstEstimate> {
    if !model.is_scalar() {
        return Err(Error::Config(
            "burst estimation is implemented for scalar plants only".into(),
        ));
    }
    if burst_len == 0 {
        return Err(Error::Config("burst length must be at least 1".into()));
    }
    policy.validate(1)?;
    if is_symmetric_control_free(policy) {
        return Ok(BurstEstimate {
            mean: 0.0,
            std_error: 0.0,
            accepted: 0,
            proposals: 0,
        });
    }
    if budget == 0 {
        return Err(Error::Config("rejection budget must be positive".into()));
    }
    let a = model.a[(0, 0)];
    let sd = model.rw[(0, 0)].sqrt();
    let mut rng = stream.rng();
    let mut x = DVector::zeros(1);
    let mut predicted = DVector::zeros(1);
    let (mut accepted, mut sum, mut sum_sq) = (0u64, 0.0, 0.0);
    for _ in 0..budget {
        let mut state = reset_state;
        let mut pred = reset_state;
        let mut acc = 0.0;
        let mut silent = true;
        for j in 0..burst_len {
            let z: f64 = rng.sample(StandardNormal);
            let w = sd * z;
            state = a * state + w;
            pred *= a;
            acc = a * acc + w;
            x[0] = state;
            predicted[0] = pred;
            let input = SchedulerInput {
                state: &x,
                predicted: &predicted,
                k: j + 1,
                tau_prev: 0,
            };
            if decide(policy, &input)? {
                silent = false;
                break;
            }
        }
        if silent {
            accepted += 1;
            sum += acc;
            sum_sq += acc * acc;
        }
    }
    let rate = accepted as f64 / budget as f64;
    if rate < MIN_ACCEPTANCE || accepted < 2 {
        return Err(Error::InfeasibleConditioning(rate));
    }
    let n = accepted as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(BurstEstimate {
        mean,
        std_error: (var / n).sqrt(),
        accepted,
        proposals: budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduling::Direction;
    use crate::stats::{integrate, std_normal_cdf, std_normal_pdf, QuadratureSpec};

    fn half_line() -> SchedulerPolicy {
        SchedulerPolicy::HalfLineState {
            threshold: 0.5,
            direction: Direction::Above,
        }
    }

    fn unit() -> PlantModel {
        PlantModel::scalar(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn symmetric_policy_is_exactly_zero() {
        let p = SchedulerPolicy::InnovationThreshold { epsilon: 1.0 };
        for len in [1, 3, 10] {
            let e = general_estimate_burst(&unit(), &p, len, 2.0, 10, &RngStream::new(1)).unwrap();
            assert_eq!(e.mean, 0.0);
            assert_eq!(e.std_error, 0.0);
        }
    }

    #[test]
    fn single_step_matches_truncated_mean() {
        let e = general_estimate_burst(&unit(), &half_line(), 1, 0.0, 1_000_000, &RngStream::new(2))
            .unwrap();
        assert!((e.mean - (-0.509_160)).abs() < 3.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn two_step_matches_planar_quadrature() {
        // Independent oracle: E[w1 + w2 | w1 < c, w1 + w2 < c] with
        // the inner w2 integral in closed form.
        let c = 0.5;
        let q = QuadratureSpec::default();
        let mass = integrate(|w1| std_normal_pdf(w1) * std_normal_cdf(c - w1), -12.0, c, &q).unwrap();
        // ∫_{-∞}^{t} (w1 + w2) φ(w2) dw2 = w1 Φ(t) - φ(t).
        let first = integrate(
            |w1| {
                let t = c - w1;
                std_normal_pdf(w1) * (w1 * std_normal_cdf(t) - std_normal_pdf(t))
            },
            -12.0,
            c,
            &q,
        )
        .unwrap();
        let oracle = first / mass;
        let e = general_estimate_burst(&unit(), &half_line(), 2, 0.0, 2_000_000, &RngStream::new(3))
            .unwrap();
        assert!((e.mean - oracle).abs() < 3.0 * e.std_error, "{e:?} vs {oracle}");
    }

    #[test]
    fn impossible_conditioning_is_reported() {
        let p = SchedulerPolicy::HalfLineState {
            threshold: -40.0,
            direction: Direction::Above,
        };
        assert!(matches!(
            general_estimate_burst(&unit(), &p, 1, 0.0, 1000, &RngStream::new(4)),
            Err(Error::InfeasibleConditioning(_))
        ));
    }

    #[test]
    fn vector_plants_are_rejected() {
        let m = PlantModel::new(
            nalgebra::DMatrix::identity(2, 2),
            nalgebra::DMatrix::from_element(2, 1, 1.0),
            nalgebra::DMatrix::identity(2, 2),
            nalgebra::DMatrix::identity(2, 2),
            DVector::zeros(2),
            1,
        )
        .unwrap();
        assert!(general_estimate_burst(&m, &half_line(), 1, 0.0, 10, &RngStream::new(5)).is_err());
    }
}
