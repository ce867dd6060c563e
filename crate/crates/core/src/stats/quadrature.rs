use crate::error::{Error, Result};

/// Settings for adaptive Simpson integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    /// Budget of panel bisections across the whole integral.
    pub max_subdivisions: usize,
    /// Integration window in standard deviations around the mean, used by
    /// callers that integrate densities over the real line.
    pub window: (f64, f64),
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            max_subdivisions: 200_000,
            window: (-10.0, 10.0),
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::Config("quadrature tolerance must be positive".into()));
        }
        if !(self.window.0 < self.window.1) {
            return Err(Error::Config("quadrature window must satisfy lo < hi".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Config("quadrature needs a positive subdivision budget".into()));
        }
        Ok(())
    }
}

/// Number of equal panels the interval is cut into before refinement, so that
/// narrow peaks are not stepped over by the first Simpson estimate.
const INITIAL_PANELS: usize = 16;
const MAX_DEPTH: u32 = 48;

struct Budget {
    left: usize,
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut Budget,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let h = b - a;
    let left = h / 12.0 * (fa + 4.0 * flm + fm);
    let right = h / 12.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH || budget.left == 0 {
        return Err(Error::Numerical(format!(
            "adaptive quadrature did not converge on [{a}, {b}]"
        )));
    }
    budget.left -= 1;
    let l = refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, budget)?;
    let r = refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, budget)?;
    Ok(l + r)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical(format!("integration bounds must be finite, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, spec).map(|v| -v);
    }
    let mut budget = Budget {
        left: spec.max_subdivisions,
    };
    let h = (b - a) / INITIAL_PANELS as f64;
    let tol = spec.abs_tol / INITIAL_PANELS as f64;
    let mut total = 0.0;
    let mut lo = a;
    let mut flo = f(lo);
    for i in 0..INITIAL_PANELS {
        let hi = if i + 1 == INITIAL_PANELS { b } else { a + h * (i + 1) as f64 };
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        let fhi = f(hi);
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += refine(&f, lo, hi, flo, fmid, fhi, whole, tol, 0, &mut budget)?;
        lo = hi;
        flo = fhi;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        let q = QuadratureSpec::default();
        assert!((integrate(|x| x * x, 0.0, 3.0, &q).unwrap() - 9.0).abs() < 1e-10);
        assert!((integrate(f64::exp, 0.0, 1.0, &q).unwrap() - (1f64.exp() - 1.0)).abs() < 1e-9);
        assert!((integrate(|x| x * x, 3.0, 0.0, &q).unwrap() + 9.0).abs() < 1e-10);
        assert_eq!(integrate(|x| x, 1.0, 1.0, &q).unwrap(), 0.0);
    }

    #[test]
    fn narrow_peak_is_found() {
        let q = QuadratureSpec::default();
        let sd: f64 = 1e-3;
        let v = integrate(
            |x| crate::stats::normal_pdf(x, 0.3123, sd * sd),
            -10.0,
            10.0,
            &q,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn exhausted_budget_reports_error() {
        let q = QuadratureSpec {
            max_subdivisions: 1,
            abs_tol: 1e-14,
            ..QuadratureSpec::default()
        };
        let r = integrate(|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, &q);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn bad_spec_rejected() {
        let q = QuadratureSpec {
            abs_tol: 0.0,
            ..QuadratureSpec::default()
        };
        assert!(integrate(|x| x, 0.0, 1.0, &q).is_err());
    }
}
