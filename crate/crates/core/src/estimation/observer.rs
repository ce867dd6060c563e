use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::PlantModel;

/// `τ_k = δ̄_k τ_{k-1} + δ_k k`.
pub fn tau_update(tau_prev: i64, delta: bool, k: i64) -> i64 {
    if delta {
        k
    } else {
        tau_prev
    }
}

/// Controller-side estimate after processing sampling instant `k`.
///
/// Starts at `k = -1` with `x̂_{-1|-1}` equal to the prior mean, standing for a
/// fictitious packet received at `τ_{-1} = -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    /// `x̂_{k|k}`.
    pub filtered: DVector<f64>,
    /// `x̂_{k|τ_{k-1}}`, the model prediction formed before `δ_k` is known.
    pub predicted: DVector<f64>,
    pub tau: i64,
    pub k: i64,
}

impl ObserverState {
    pub fn new(prior_mean: DVector<f64>) -> Self {
        Self {
            predicted: prior_mean.clone(),
            filtered: prior_mean,
            tau: -1,
            k: -1,
        }
    }

    /// `d_k = k - τ_k`.
    pub fn delay(&self) -> i64 {
        self.k - self.tau
    }

    /// `x̂_{k+1|τ_k} = A x̂_{k|k} + B u_k`. Before the first sample the prior
    /// mean is the prediction.
    pub fn predict(&self, model: &PlantModel, u_prev: Option<&DVector<f64>>) -> Result<DVector<f64>> {
        if self.k < 0 {
            return Ok(self.filtered.clone());
        }
        let u = u_prev.ok_or_else(|| {
            Error::Protocol(format!("prediction past k = {} needs the applied control", self.k))
        })?;
        if u.len() != model.input_dim() {
            return Err(Error::Dimension(format!(
                "control has length {}, expected {}",
                u.len(),
                model.input_dim()
            )));
        }
        Ok(&model.a * &self.filtered + &model.b * u)
    }

    pub fn error(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.filtered
    }
}

/// `x̂_{k|k} = δ̄_k x̂_{k|τ_k} + δ_k x_k` with `x̂_{k|τ_k} = A x̂_{k-1|k-1} + B u_{k-1}`.
///
/// `y` must carry the delivered sample when `delta` is set.
pub fn observer_update(
    state: &ObserverState,
    delta: bool,
    y: Option<&DVector<f64>>,
    u_prev: Option<&DVector<f64>>,
    model: &PlantModel,
) -> Result<ObserverState> {
    let k = state.k + 1;
    let predicted = state.predict(model, u_prev)?;
    let filtered = if delta {
        let y = y.ok_or_else(|| Error::Protocol(format!("δ = 1 at k = {k} without a sample")))?;
        if y.len() != predicted.len() {
            return Err(Error::Dimension(format!(
                "sample has length {}, expected {}",
                y.len(),
                predicted.len()
            )));
        }
        y.clone()
    } else {
        predicted.clone()
    };
    Ok(ObserverState {
        filtered,
        predicted,
        tau: tau_update(state.tau, delta, k),
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;

    #[test]
    fn tau_examples() {
        assert_eq!(tau_update(-1, false, 0), -1);
        assert_eq!(tau_update(1, true, 3), 3);
        assert_eq!(tau_update(1, false, 3), 1);
    }

    fn scalar() -> PlantModel {
        PlantModel::scalar(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn delivered_sample_resets_estimate() {
        let s = ObserverState::new(dvector![0.0]);
        let s = observer_update(&s, true, Some(&dvector![2.3]), None, &scalar()).unwrap();
        assert_eq!(s.filtered[0], 2.3);
        assert_eq!(s.tau, 0);
        assert_eq!(s.delay(), 0);
    }

    #[test]
    fn withheld_sample_uses_prediction() {
        let mut s = ObserverState::new(dvector![0.0]);
        s = observer_update(&s, true, Some(&dvector![1.0]), None, &scalar()).unwrap();
        s = observer_update(&s, false, None, Some(&dvector![-0.5]), &scalar()).unwrap();
        assert_eq!(s.filtered[0], 0.5);
        assert_eq!(s.tau, 0);
        assert_eq!(s.delay(), 1);
    }

    #[test]
    fn missing_sample_is_protocol_error() {
        let s = ObserverState::new(dvector![0.0]);
        assert!(matches!(
            observer_update(&s, true, None, None, &scalar()),
            Err(Error::Protocol(_))
        ));
        let s = observer_update(&s, false, None, None, &scalar()).unwrap();
        assert!(matches!(
            observer_update(&s, false, None, None, &scalar()),
            Err(Error::Protocol(_))
        ));
    }

    proptest! {
        #[test]
        fn delay_zero_iff_delivered(deltas in proptest::collection::vec(any::<bool>(), 1..30)) {
            let model = scalar();
            let mut s = ObserverState::new(dvector![0.0]);
            for (k, d) in deltas.iter().enumerate() {
                let x = dvector![k as f64];
                s = observer_update(&s, *d, Some(&x), Some(&dvector![0.1]), &model).unwrap();
                prop_assert_eq!(s.delay() == 0, *d);
                prop_assert!(s.tau >= -1 && s.tau <= s.k);
                if *d {
                    prop_assert_eq!(s.error(&x).norm(), 0.0);
                }
            }
        }
    }
}
