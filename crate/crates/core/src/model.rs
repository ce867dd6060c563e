//! Plant dynamics, loop configuration and scenario description.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::network::{CrmConfig, TrafficSource};
use crate::scheduling::SchedulerPolicy;

const SYMMETRY_TOL: f64 = 1e-9;
const PSD_CLIP: f64 = -1e-12;

/// Discrete-time linear plant `x_{k+1} = A x_k + B u_k + w_k` sampled every
/// `period` global ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Process-noise covariance.
    pub rw: DMatrix<f64>,
    /// Initial-state covariance.
    pub r0: DMatrix<f64>,
    pub x0_mean: DVector<f64>,
    pub period: u32,
}

impl PlantModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        rw: DMatrix<f64>,
        r0: DMatrix<f64>,
        x0_mean: DVector<f64>,
        period: u32,
    ) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || n == 0 {
            return Err(Error::Dimension(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "B must have {n} rows and at least one column, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        check_square("Rw", &rw, n)?;
        check_square("R0", &r0, n)?;
        if x0_mean.len() != n {
            return Err(Error::Dimension(format!(
                "x0_mean has length {}, expected {n}",
                x0_mean.len()
            )));
        }
        require_psd("Rw", &rw)?;
        require_psd("R0", &r0)?;
        if period == 0 {
            return Err(Error::Config("sampling period must be at least 1".into()));
        }
        Ok(Self {
            a,
            b,
            rw,
            r0,
            x0_mean,
            period,
        })
    }

    /// Scalar plant with zero initial mean and unit period.
    pub fn scalar(a: f64, b: f64, rw: f64, r0: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, rw),
            DMatrix::from_element(1, 1, r0),
            DVector::zeros(1),
            1,
        )
    }

    pub fn with_period(mut self, period: u32) -> Result<Self> {
        if period == 0 {
            return Err(Error::Config("sampling period must be at least 1".into()));
        }
        self.period = period;
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn is_scalar(&self) -> bool {
        self.state_dim() == 1 && self.input_dim() == 1
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        plant_step(self, x, u, w)
    }
}

/// `A x + B u + w`.
pub fn plant_step(
    model: &PlantModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = model.state_dim();
    if x.len() != n || w.len() != n || u.len() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "plant step expects x,w of length {n} and u of length {}, got {}, {}, {}",
            model.input_dim(),
            x.len(),
            w.len(),
            u.len()
        )));
    }
    Ok(&model.a * x + &model.b * u + w)
}

/// State with the contribution of the applied controls removed:
/// `x̄_k = x_k - Σ_{ℓ=1..k} A^{ℓ-1} B u_{k-ℓ}`, where `controls = [u_0, .., u_{k-1}]`.
pub fn uncontrolled_state(
    model: &PlantModel,
    controls: &[DVector<f64>],
    x_k: &DVector<f64>,
) -> Result<DVector<f64>> {
    if x_k.len() != model.state_dim() {
        return Err(Error::Dimension(format!(
            "state has length {}, expected {}",
            x_k.len(),
            model.state_dim()
        )));
    }
    let mut out = x_k.clone();
    let mut power = DMatrix::<f64>::identity(model.state_dim(), model.state_dim());
    for u in controls.iter().rev() {
        if u.len() != model.input_dim() {
            return Err(Error::Dimension(format!(
                "control has length {}, expected {}",
                u.len(),
                model.input_dim()
            )));
        }
        out -= &power * (&model.b * u);
        power = &power * &model.a;
    }
    Ok(out)
}

/// Noisy sensor `m_k = C z_k + v_k` read by a Kalman filter in the sensor node.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub c: DMatrix<f64>,
    pub rv: DMatrix<f64>,
}

impl SensorModel {
    pub fn new(c: DMatrix<f64>, rv: DMatrix<f64>, state_dim: usize) -> Result<Self> {
        if c.ncols() != state_dim || c.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "C must be p x {state_dim}, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        check_square("Rv", &rv, c.nrows())?;
        require_pd("Rv", &rv)?;
        Ok(Self { c, rv })
    }
}

/// Quadratic cost weights plus the per-transmission network penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub q0: DMatrix<f64>,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub lambda: f64,
}

impl Weights {
    pub fn new(q0: DMatrix<f64>, q1: DMatrix<f64>, q2: DMatrix<f64>, lambda: f64) -> Result<Self> {
        require_psd("Q0", &q0)?;
        require_psd("Q1", &q1)?;
        require_pd("Q2", &q2)?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Config(format!(
                "network penalty must be a nonnegative number, got {lambda}"
            )));
        }
        Ok(Self { q0, q1, q2, lambda })
    }

    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            q0: DMatrix::identity(n, n),
            q1: DMatrix::identity(n, n),
            q2: DMatrix::identity(m, m),
            lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub name: String,
    /// Aggregation label, e.g. the plant type.
    pub group: String,
    pub plant: PlantModel,
    pub scheduler: SchedulerPolicy,
    pub horizon: usize,
    pub weights: Weights,
    pub sensor: Option<SensorModel>,
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.plant.state_dim();
        let m = self.plant.input_dim();
        if self.horizon == 0 {
            return Err(Error::Config(format!("loop {}: horizon must be positive", self.name)));
        }
        check_square("Q0", &self.weights.q0, n)?;
        check_square("Q1", &self.weights.q1, n)?;
        check_square("Q2", &self.weights.q2, m)?;
        Weights::new(
            self.weights.q0.clone(),
            self.weights.q1.clone(),
            self.weights.q2.clone(),
            self.weights.lambda,
        )?;
        self.scheduler.validate(n)?;
        if let Some(sensor) = &self.sensor {
            SensorModel::new(sensor.c.clone(), sensor.rv.clone(), n)?;
        }
        Ok(())
    }

    /// Global tick of local sampling instant `k`.
    pub fn tick_of(&self, k: usize) -> u64 {
        k as u64 * u64::from(self.plant.period)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkScenario {
    pub loops: Vec<LoopConfig>,
    pub sources: Vec<TrafficSource>,
    pub crm: CrmConfig,
    pub global_horizon: u64,
}

impl NetworkScenario {
    /// Builds a scenario whose global horizon just covers every loop.
    pub fn new(loops: Vec<LoopConfig>, sources: Vec<TrafficSource>, crm: CrmConfig) -> Result<Self> {
        let global_horizon = loops
            .iter()
            .map(|l| l.tick_of(l.horizon))
            .max()
            .unwrap_or(0);
        let s = Self {
            loops,
            sources,
            crm,
            global_horizon,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.loops.is_empty() {
            return Err(Error::Config("scenario needs at least one loop".into()));
        }
        self.crm.validate()?;
        for l in &self.loops {
            l.validate()?;
            let last = l.tick_of(l.horizon - 1);
            if last >= self.global_horizon {
                return Err(Error::Config(format!(
                    "loop {} samples at tick {last}, beyond the global horizon {}",
                    l.name, self.global_horizon
                )));
            }
        }
        for s in &self.sources {
            s.validate()?;
        }
        Ok(())
    }

    /// Copy with every threshold scheduler's epsilon replaced.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut s = self.clone();
        for l in &mut s.loops {
            l.scheduler = l.scheduler.with_epsilon(epsilon);
        }
        s
    }

    /// Copy with every loop using `policy`.
    pub fn with_policy(&self, policy: SchedulerPolicy) -> Self {
        let mut s = self.clone();
        for l in &mut s.loops {
            l.scheduler = policy.clone();
        }
        s
    }

    /// Distinct group labels in first-appearance order.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.loops {
            if !out.contains(&l.group) {
                out.push(l.group.clone());
            }
        }
        out
    }
}

fn check_square(name: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Dimension(format!(
            "{name} must be {n}x{n}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() <= SYMMETRY_TOL * scale
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

pub(crate) fn require_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{name} must be square")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{name} has non-finite entries")));
    }
    if !is_symmetric(m) {
        return Err(Error::Config(format!("{name} must be symmetric")));
    }
    if m.nrows() > 0 && min_eigenvalue(m) < PSD_CLIP * m.amax().max(1.0) {
        return Err(Error::Config(format!("{name} must be positive semi-definite")));
    }
    Ok(())
}

pub(crate) fn require_pd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    require_psd(name, m).map_err(|_| Error::Config(format!("{name} must be positive definite")))?;
    if m.nrows() == 0 || min_eigenvalue(m) <= 0.0 || m.clone().cholesky().is_none() {
        return Err(Error::Config(format!("{name} must be positive definite")));
    }
    Ok(())
}

/// Symmetric square root `F` with `F F = cov`, clipping eigenvalues down to
/// -1e-12 (relative) to zero.
pub fn psd_sqrt(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_psd("covariance", cov)?;
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Zero-mean Gaussian sampler with a fixed covariance.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
    zero: bool,
}

impl GaussianSampler {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let factor = psd_sqrt(cov)?;
        let zero = factor.iter().all(|v| *v == 0.0);
        Ok(Self { factor, zero })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.dim();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if self.zero {
            return DVector::zeros(n);
        }
        &self.factor * z
    }
}

/// One Gaussian draw with covariance `cov`.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, cov: &DMatrix<f64>) -> Result<DVector<f64>> {
    Ok(GaussianSampler::new(cov)?.sample(rng))
}
