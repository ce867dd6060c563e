//! Scheduler policies deciding whether the current sample is handed to the
//! MAC (`γ_k = 1`) or withheld.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Whether a policy's decisions can depend on previously applied controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InformationPattern {
    UsesControls,
    ControlFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Transmit when `x >= c`.
    Above,
    /// Transmit when `x <= c`.
    Below,
}

/// User-supplied map of the innovation. It is only ever evaluated on a
/// sign-canonical representative of `±r`, so the resulting policy is
/// symmetric whatever the closure does.
type InnovationMap = dyn Fn(&DVector<f64>) -> bool + Send + Sync;

#[derive(Clone)]
pub struct SymmetricMap {
    name: String,
    map: Arc<InnovationMap>,
}

impl SymmetricMap {
    pub fn new<F>(name: impl Into<String>, map: F) -> Self
    where
        F: Fn(&DVector<f64>) -> bool + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            map: Arc::new(map),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, r: &DVector<f64>) -> bool {
        let flip = r.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0);
        if flip {
            (self.map)(&(-r))
        } else {
            (self.map)(r)
        }
    }
}

impl fmt::Debug for SymmetricMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetricMap").field("name", &self.name).finish()
    }
}

impl PartialEq for SymmetricMap {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.map, &other.map)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchedulerPolicy {
    AlwaysTransmit,
    /// `‖x_k‖² > ε`.
    StateThreshold { epsilon: f64 },
    /// `‖x_k - x̂_{k|τ_{k-1}}‖² > ε`, the dual predictor scheduler.
    InnovationThreshold { epsilon: f64 },
    /// Scalar half-line rule, e.g. `x_k >= 0.5`.
    HalfLineState { threshold: f64, direction: Direction },
    /// Symmetric user map of the innovation.
    Symmetric(SymmetricMap),
}

/// What the scheduler sees at sampling instant `k`.
#[derive(Debug, Clone, Copy)]
pub struct SchedulerInput<'a> {
    pub state: &'a DVector<f64>,
    /// Controller-side estimate if this sample is not delivered.
    pub predicted: &'a DVector<f64>,
    pub k: usize,
    pub tau_prev: i64,
}

impl SchedulerPolicy {
    pub fn information_pattern(&self) -> InformationPattern {
        match self {
            SchedulerPolicy::AlwaysTransmit
            | SchedulerPolicy::InnovationThreshold { .. }
            | SchedulerPolicy::Symmetric(_) => InformationPattern::ControlFree,
            SchedulerPolicy::StateThreshold { .. } | SchedulerPolicy::HalfLineState { .. } => {
                InformationPattern::UsesControls
            }
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self {
            SchedulerPolicy::StateThreshold { epsilon }
            | SchedulerPolicy::InnovationThreshold { epsilon } => Some(*epsilon),
            _ => None,
        }
    }

    /// Same policy with a new threshold; policies without one are unchanged.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        match self {
            SchedulerPolicy::StateThreshold { .. } => SchedulerPolicy::StateThreshold { epsilon },
            SchedulerPolicy::InnovationThreshold { .. } => {
                SchedulerPolicy::InnovationThreshold { epsilon }
            }
            other => other.clone(),
        }
    }

    pub fn validate(&self, state_dim: usize) -> Result<()> {
        match self {
            SchedulerPolicy::StateThreshold { epsilon }
            | SchedulerPolicy::InnovationThreshold { epsilon } => {
                if !(*epsilon >= 0.0) {
                    return Err(Error::Config(format!(
                        "scheduler threshold must be nonnegative, got {epsilon}"
                    )));
                }
            }
            SchedulerPolicy::HalfLineState { threshold, .. } => {
                if state_dim != 1 {
                    return Err(Error::Config(
                        "half-line scheduler requires a scalar state".into(),
                    ));
                }
                if threshold.is_nan() {
                    return Err(Error::Config("half-line threshold is NaN".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// `γ_k` for the given policy.
pub fn decide(policy: &SchedulerPolicy, input: &SchedulerInput<'_>) -> Result<bool> {
    let n = input.state.len();
    if input.predicted.len() != n {
        return Err(Error::Dimension(format!(
            "scheduler state has length {n} but prediction has length {}",
            input.predicted.len()
        )));
    }
    Ok(match policy {
        SchedulerPolicy::AlwaysTransmit => true,
        SchedulerPolicy::StateThreshold { epsilon } => input.state.norm_squared() > *epsilon,
        SchedulerPolicy::InnovationThreshold { epsilon } => {
            (input.state - input.predicted).norm_squared() > *epsilon
        }
        SchedulerPolicy::HalfLineState {
            threshold,
            direction,
        } => {
            if n != 1 {
                return Err(Error::Config(
                    "half-line scheduler requires a scalar state".into(),
                ));
            }
            match direction {
                Direction::Above => input.state[0] >= *threshold,
                Direction::Below => input.state[0] <= *threshold,
            }
        }
        SchedulerPolicy::Symmetric(map) => map.eval(&(input.state - input.predicted)),
    })
}

/// True for policies whose decisions are symmetric in the innovation and never
/// depend on past controls.
pub fn is_symmetric_control_free(policy: &SchedulerPolicy) -> bool {
    policy.information_pattern() == InformationPattern::ControlFree
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;

    fn input<'a>(x: &'a DVector<f64>, p: &'a DVector<f64>) -> SchedulerInput<'a> {
        SchedulerInput {
            state: x,
            predicted: p,
            k: 3,
            tau_prev: 1,
        }
    }

    #[test]
    fn innovation_threshold_examples() {
        let pol = SchedulerPolicy::InnovationThreshold { epsilon: 3.5 };
        let p = dvector![1.0];
        assert!(decide(&pol, &input(&dvector![3.0], &p)).unwrap());
        assert!(!decide(&pol, &input(&dvector![2.8], &p)).unwrap());
    }

    #[test]
    fn state_threshold_is_strict() {
        let pol = SchedulerPolicy::StateThreshold { epsilon: 0.0 };
        let p = dvector![0.0];
        assert!(!decide(&pol, &input(&dvector![0.0], &p)).unwrap());
        assert!(decide(&pol, &input(&dvector![1e-150], &p)).unwrap());
        let pol = SchedulerPolicy::StateThreshold { epsilon: 4.0 };
        assert!(!decide(&pol, &input(&dvector![2.0], &p)).unwrap());
    }

    #[test]
    fn half_line_uses_closed_inequality() {
        let pol = SchedulerPolicy::HalfLineState {
            threshold: 0.5,
            direction: Direction::Above,
        };
        let p = dvector![0.0];
        assert!(decide(&pol, &input(&dvector![0.5], &p)).unwrap());
        assert!(!decide(&pol, &input(&dvector![0.4999], &p)).unwrap());
        let two = dvector![0.5, 0.5];
        assert!(matches!(decide(&pol, &input(&two, &two)), Err(Error::Config(_))));
        assert!(pol.validate(2).is_err());
    }

    #[test]
    fn control_freedom_tags() {
        assert!(is_symmetric_control_free(&SchedulerPolicy::InnovationThreshold { epsilon: 1.0 }));
        assert!(is_symmetric_control_free(&SchedulerPolicy::AlwaysTransmit));
        assert!(!is_symmetric_control_free(&SchedulerPolicy::StateThreshold { epsilon: 1.0 }));
        assert!(!is_symmetric_control_free(&SchedulerPolicy::HalfLineState {
            threshold: 0.5,
            direction: Direction::Above
        }));
    }

    #[test]
    fn negative_threshold_rejected() {
        assert!(SchedulerPolicy::InnovationThreshold { epsilon: -1.0 }.validate(1).is_err());
    }

    #[test]
    fn custom_map_is_symmetrized() {
        // Deliberately asymmetric closure.
        let pol = SchedulerPolicy::Symmetric(SymmetricMap::new("pos", |r| r[0] > 1.0));
        let z = dvector![0.0, 0.0];
        let a = dvector![2.0, -1.0];
        let b = dvector![-2.0, 1.0];
        assert_eq!(
            decide(&pol, &input(&a, &z)).unwrap(),
            decide(&pol, &input(&b, &z)).unwrap()
        );
    }

    proptest! {
        #[test]
        fn innovation_policy_is_symmetric(
            r in proptest::collection::vec(-5.0f64..5.0, 1..4),
            p in proptest::collection::vec(-5.0f64..5.0, 4),
            eps in 0.0f64..10.0,
        ) {
            let n = r.len();
            let pred = DVector::from_vec(p[..n].to_vec());
            let rv = DVector::from_vec(r);
            let plus = &pred + &rv;
            let minus = &pred - &rv;
            let pol = SchedulerPolicy::InnovationThreshold { epsilon: eps };
            prop_assert_eq!(
                decide(&pol, &input(&plus, &pred)).unwrap(),
                decide(&pol, &input(&minus, &pred)).unwrap()
            );
        }

        #[test]
        fn decisions_monotone_in_epsilon(
            x in -5.0f64..5.0, p in -5.0f64..5.0, e1 in 0.0f64..10.0, de in 0.0f64..10.0,
        ) {
            let xs = dvector![x];
            let ps = dvector![p];
            for make in [
                (|e| SchedulerPolicy::InnovationThreshold { epsilon: e }) as fn(f64) -> SchedulerPolicy,
                |e| SchedulerPolicy::StateThreshold { epsilon: e },
            ] {
                let lo = decide(&make(e1), &input(&xs, &ps)).unwrap();
                let hi = decide(&make(e1 + de), &input(&xs, &ps)).unwrap();
                prop_assert!(lo as u8 >= hi as u8);
            }
        }
    }
}
