//! Density of `e = a X + W` with `X` a one-sided truncated Gaussian and `W`
//! an independent zero-mean Gaussian, and moments of `e | e < c`.

use super::normal::{normal_pdf, std_normal_cdf, TruncatedGaussian};
use super::quadrature::{integrate, QuadratureSpec};
use crate::error::{Error, Result};

const MIN_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundMoments {
    /// `Pr(e < c)`.
    pub probability: f64,
    pub mean: f64,
    pub variance: f64,
}

fn check_noise(noise_var: f64) -> Result<()> {
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::Config(format!("noise variance must be positive, got {noise_var}")));
    }
    Ok(())
}

/// `∫_{-∞}^{b} φ_X(x) φ_W(ε - a x) dx`, the density of `a X + W` at `eps`.
///
/// Evaluated in closed form: `e` is Gaussian before truncation and `X | e` is
/// Gaussian, so the integral is the marginal density of `e` times the
/// conditional probability that `X < b`.
pub fn compound_density(a: f64, tg: &TruncatedGaussian, noise_var: f64, eps: f64) -> Result<f64> {
    check_noise(noise_var)?;
    if a == 0.0 {
        return Ok(normal_pdf(eps, 0.0, noise_var));
    }
    let var_x = tg.variance;
    let var_e = a * a * var_x + noise_var;
    let post_mean = tg.mean + a * var_x * (eps - a * tg.mean) / var_e;
    let post_sd = (var_x * noise_var / var_e).sqrt();
    let inside = std_normal_cdf((tg.upper - post_mean) / post_sd);
    Ok(normal_pdf(eps, a * tg.mean, var_e) * inside / tg.probability())
}

/// Mean and variance of `e = a X + W` conditioned on `e < c`, by quadrature
/// against [`compound_density`].
pub fn conditional_moments_compound(
    a: f64,
    tg: &TruncatedGaussian,
    noise_var: f64,
    c: f64,
    q: &QuadratureSpec,
) -> Result<CompoundMoments> {
    check_noise(noise_var)?;
    q.validate()?;
    if a == 0.0 {
        let m = TruncatedGaussian::new(0.0, noise_var, c)?.moments();
        return Ok(CompoundMoments {
            probability: m.probability,
            mean: m.mean,
            variance: m.variance,
        });
    }
    let tm = tg.moments();
    let centre = a * tm.mean;
    let spread = (a * a * tm.variance + noise_var).sqrt();
    let lo = centre + q.window.0 * spread;
    let hi = c.min(centre + q.window.1 * spread);
    if hi <= lo {
        return Err(Error::DegenerateTruncation(0.0));
    }
    let density = |e: f64| compound_density(a, tg, noise_var, e);
    // Errors inside the closure are surfaced after integration.
    let failure = std::cell::RefCell::new(None);
    let eval = |e: f64| match density(e) {
        Ok(v) => v,
        Err(err) => {
            failure.borrow_mut().get_or_insert(err);
            0.0
        }
    };
    let p = integrate(eval, lo, hi, q)?;
    if let Some(err) = failure.borrow_mut().take() {
        return Err(err);
    }
    if p < MIN_MASS {
        return Err(Error::DegenerateTruncation(p));
    }
    let mean = integrate(|e| e * eval(e), lo, hi, q)? / p;
    let variance = integrate(|e| (e - mean).powi(2) * eval(e), lo, hi, q)? / p;
    if let Some(err) = failure.borrow_mut().take() {
        return Err(err);
    }
    Ok(CompoundMoments {
        probability: p,
        mean,
        variance,
    })
}
