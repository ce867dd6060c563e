use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const MIN_MASS: f64 = 1e-12;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Φ(x)` through `erfc`, accurate in the lower tail.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Density of `N(mean, variance)` at `x`.
pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let sd = variance.sqrt();
    std_normal_pdf((x - mean) / sd) / sd
}

/// `X | X < upper` for `X ~ N(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGaussian {
    pub mean: f64,
    pub variance: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMoments {
    pub mean: f64,
    pub variance: f64,
    /// `Pr(X < upper)` of the untruncated variable.
    pub probability: f64,
}

impl TruncatedGaussian {
    pub fn new(mean: f64, variance: f64, upper: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() || !mean.is_finite() || upper.is_nan() {
            return Err(Error::Config(format!(
                "truncated Gaussian needs finite mean and positive variance, got ({mean}, {variance})"
            )));
        }
        let tg = Self {
            mean,
            variance,
            upper,
        };
        let p = tg.probability();
        if p < MIN_MASS {
            return Err(Error::DegenerateTruncation(p));
        }
        Ok(tg)
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    fn beta(&self) -> f64 {
        (self.upper - self.mean) / self.sd()
    }

    pub fn probability(&self) -> f64 {
        std_normal_cdf(self.beta())
    }

    /// Density of the truncated variable.
    pub fn pdf(&self, x: f64) -> f64 {
        if x >= self.upper {
            return 0.0;
        }
        normal_pdf(x, self.mean, self.variance) / self.probability()
    }

    pub fn moments(&self) -> TruncatedMoments {
        let beta = self.beta();
        let p = std_normal_cdf(beta);
        if beta == f64::INFINITY {
            return TruncatedMoments {
                mean: self.mean,
                variance: self.variance,
                probability: 1.0,
            };
        }
        // Inverse Mills ratio for upper truncation.
        let lambda = std_normal_pdf(beta) / p;
        TruncatedMoments {
            mean: self.mean - self.sd() * lambda,
            variance: self.variance * (1.0 - beta * lambda - lambda * lambda),
            probability: p,
        }
    }
}

/// Closed-form mean and variance of a one-sided truncated normal.
pub fn truncated_moments(tg: &TruncatedGaussian) -> Result<TruncatedMoments> {
    let m = tg.moments();
    if m.probability < MIN_MASS {
        return Err(Error::DegenerateTruncation(m.probability));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{integrate, QuadratureSpec};
    use proptest::prelude::*;

    #[test]
    fn pdf_and_cdf_values() {
        assert!((std_normal_pdf(0.0) - 0.398_942_280_4).abs() < 1e-10);
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(0.5) - 0.691_462_461_3).abs() < 1e-10);
        assert!((std_normal_cdf(-8.0) - 6.220_960_574_271_78e-16).abs() < 1e-25);
    }

    #[test]
    fn half_truncation_mean() {
        let tg = TruncatedGaussian::new(0.0, 1.0, 0.0).unwrap();
        let m = truncated_moments(&tg).unwrap();
        assert!((m.mean + (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    /// Frozen values at b = 0.5, checked against direct quadrature of the
    /// truncated density.
    #[test]
    fn truncation_at_one_half() {
        let tg = TruncatedGaussian::new(0.0, 1.0, 0.5).unwrap();
        let m = truncated_moments(&tg).unwrap();
        assert!((m.mean + 0.509_160).abs() < 1e-6, "{}", m.mean);
        assert!((m.variance - 0.486_175).abs() < 1e-6, "{}", m.variance);

        let q = QuadratureSpec::default();
        let p = integrate(std_normal_pdf, -12.0, 0.5, &q).unwrap();
        let mean = integrate(|x| x * std_normal_pdf(x), -12.0, 0.5, &q).unwrap() / p;
        let var = integrate(|x| (x - mean).powi(2) * std_normal_pdf(x), -12.0, 0.5, &q).unwrap() / p;
        assert!((m.mean - mean).abs() < 1e-8);
        assert!((m.variance - var).abs() < 1e-8);
    }

    #[test]
    fn far_tail_truncation_is_identity() {
        let tg = TruncatedGaussian::new(0.0, 1.0, 10.0).unwrap();
        let m = truncated_moments(&tg).unwrap();
        assert!(m.mean.abs() < 1e-9);
        assert!((m.variance - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_truncation_is_an_error() {
        assert!(matches!(
            TruncatedGaussian::new(0.0, 1.0, -8.0),
            Err(Error::DegenerateTruncation(_))
        ));
        assert!(TruncatedGaussian::new(0.0, 0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn mean_below_bound_and_variance_shrinks(
            mu in -5.0f64..5.0, var in 0.01f64..20.0, offset in -6.5f64..6.0,
        ) {
            let upper = mu + offset * var.sqrt();
            let tg = TruncatedGaussian::new(mu, var, upper).unwrap();
            let m = truncated_moments(&tg).unwrap();
            prop_assert!(m.mean < upper);
            prop_assert!(m.variance < var);
            prop_assert!(m.variance > 0.0);
        }

        #[test]
        fn cdf_is_monotone(x in -10.0f64..10.0, dx in 0.0f64..2.0) {
            prop_assert!(std_normal_cdf(x) <= std_normal_cdf(x + dx));
            prop_assert!((0.0..=1.0).contains(&std_normal_cdf(x)));
        }
    }
}
