use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{PlantModel, SensorModel};

/// Kalman filter running in the sensor node on `m_k = C z_k + v_k`. Its
/// filtered estimate is the state handed to the scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorKf {
    pub sensor: SensorModel,
    /// `ẑ^s_{k|k}`; before the first step, the prior mean.
    pub estimate: DVector<f64>,
    /// `P^s_{k|k}`; before the first step, the prior covariance.
    pub filtered_cov: DMatrix<f64>,
    /// `P^s_k`.
    pub predicted_cov: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub innovation_cov: DMatrix<f64>,
    pub innovation: DVector<f64>,
    pub steps: usize,
}

impl SensorKf {
    pub fn new(sensor: SensorModel, prior_mean: DVector<f64>, prior_cov: DMatrix<f64>) -> Self {
        let n = prior_mean.len();
        let p = sensor.c.nrows();
        Self {
            sensor,
            estimate: prior_mean,
            predicted_cov: prior_cov.clone(),
            filtered_cov: prior_cov,
            gain: DMatrix::zeros(n, p),
            innovation_cov: DMatrix::zeros(p, p),
            innovation: DVector::zeros(p),
            steps: 0,
        }
    }
}

/// One predict/update step. The first step takes the prior as the prediction.
pub fn sensor_kf_step(
    kf: &SensorKf,
    measurement: &DVector<f64>,
    u_prev: Option<&DVector<f64>>,
    model: &PlantModel,
) -> Result<SensorKf> {
    let c = &kf.sensor.c;
    if measurement.len() != c.nrows() {
        return Err(Error::Dimension(format!(
            "measurement has length {}, expected {}",
            measurement.len(),
            c.nrows()
        )));
    }
    let (z_pred, p_pred) = if kf.steps == 0 {
        (kf.estimate.clone(), kf.filtered_cov.clone())
    } else {
        let u = u_prev
            .ok_or_else(|| Error::Protocol("sensor filter step needs the applied control".into()))?;
        (
            &model.a * &kf.estimate + &model.b * u,
            &model.a * &kf.filtered_cov * model.a.transpose() + &model.rw,
        )
    };
    let innovation = measurement - c * &z_pred;
    let re = c * &p_pred * c.transpose() + &kf.sensor.rv;
    let re_inv = re
        .clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or_else(|| Error::Numerical("innovation covariance is numerically singular".into()))?;
    let gain = &p_pred * c.transpose() * re_inv;
    let estimate = &z_pred + &gain * &innovation;
    // Joseph form keeps the covariance PSD.
    let n = z_pred.len();
    let ikc = DMatrix::<f64>::identity(n, n) - &gain * c;
    let p = &ikc * &p_pred * ikc.transpose() + &gain * &kf.sensor.rv * gain.transpose();
    let filtered_cov = (&p + p.transpose()) * 0.5;
    Ok(SensorKf {
        sensor: kf.sensor.clone(),
        estimate,
        filtered_cov,
        predicted_cov: p_pred,
        gain,
        innovation_cov: re,
        innovation,
        steps: kf.steps + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use nalgebra::{dvector, SymmetricEigen};
    use rand::Rng;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn hand_computed_scalar_step() {
        let model = PlantModel::scalar(1.0, 1.0, 1.0, 1.0).unwrap();
        let sensor = SensorModel::new(m1(1.0), m1(1.0), 1).unwrap();
        let kf = SensorKf::new(sensor, dvector![0.0], m1(1.0));
        let kf = sensor_kf_step(&kf, &dvector![2.0], None, &model).unwrap();
        assert!((kf.innovation_cov[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((kf.gain[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((kf.estimate[0] - 1.0).abs() < 1e-15);
        assert!((kf.filtered_cov[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uninformative_measurement_keeps_prediction() {
        let model = PlantModel::scalar(0.9, 1.0, 1.0, 1.0).unwrap();
        let sensor = SensorModel::new(m1(1.0), m1(1e9), 1).unwrap();
        let kf = SensorKf::new(sensor, dvector![1.0], m1(1.0));
        let kf = sensor_kf_step(&kf, &dvector![1.0], None, &model).unwrap();
        let kf = sensor_kf_step(&kf, &dvector![50.0], Some(&dvector![0.2]), &model).unwrap();
        assert!(kf.gain[(0, 0)] < 1e-8);
        assert!((kf.estimate[0] - (0.9 * 1.0 + 0.2)).abs() < 1e-6);
    }

    #[test]
    fn perfect_measurement_returns_measurement() {
        let model = PlantModel::new(
            DMatrix::identity(2, 2),
            DMatrix::from_element(2, 1, 1.0),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            1,
        )
        .unwrap();
        let sensor = SensorModel::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 1e-12, 2).unwrap();
        let kf = SensorKf::new(sensor, DVector::zeros(2), DMatrix::identity(2, 2));
        let kf = sensor_kf_step(&kf, &dvector![3.0, -1.0], None, &model).unwrap();
        assert!((kf.estimate - dvector![3.0, -1.0]).amax() < 1e-9);
    }

    #[test]
    fn covariances_stay_psd_over_many_steps() {
        let mut rng = RngStream::new(3).rng();
        let a = DMatrix::from_row_slice(2, 2, &[1.1, 0.3, -0.2, 0.95]);
        let model = PlantModel::new(
            a,
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            1,
        )
        .unwrap();
        let sensor = SensorModel::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), m1(0.01), 2).unwrap();
        let mut kf = SensorKf::new(sensor, DVector::zeros(2), DMatrix::identity(2, 2));
        for _ in 0..10_000 {
            let m = dvector![rng.random_range(-5.0..5.0)];
            let u = dvector![rng.random_range(-1.0..1.0)];
            kf = sensor_kf_step(&kf, &m, Some(&u), &model).unwrap();
            for p in [&kf.filtered_cov, &kf.predicted_cov] {
                assert!((p - p.transpose()).amax() < 1e-12);
                assert!(SymmetricEigen::new(p.clone()).eigenvalues.min() >= -1e-12);
            }
        }
    }
}
