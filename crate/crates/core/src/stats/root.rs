use crate::error::{Error, Result};

const MAX_ITER: usize = 2_000;

/// Root of `f` on `[lo, hi]`, which must bracket a sign change.
///
/// Secant steps are taken while they shrink the bracket by at least half;
/// otherwise the step falls back to bisection, so the bracket stays valid and
/// the iteration terminates. Stops when `|f(x)| <= tol` or the bracket is
/// narrower than `tol`.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::Numerical("root function returned NaN at bracket ends".into()));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracket { lo: a, hi: b });
    }
    let mut bisect = false;
    for _ in 0..MAX_ITER {
        let width = b - a;
        let mid = a + 0.5 * width;
        let mut x = if bisect { mid } else { b - fb * (b - a) / (fb - fa) };
        if !(x > a && x < b) {
            x = mid;
        }
        let fx = f(x);
        if fx.is_nan() {
            return Err(Error::Numerical(format!("root function returned NaN at {x}")));
        }
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if b - a <= tol {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
        bisect = b - a > 0.5 * width;
    }
    Err(Error::Numerical("root finder exceeded its iteration budget".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_roots() {
        assert!((find_root(|x| x - 1.0, 0.0, 2.0, 1e-12).unwrap() - 1.0).abs() < 1e-12);
        assert!((find_root(|u| 2.0 * u + 1.0, -1.0, 0.0, 1e-12).unwrap() + 0.5).abs() < 1e-12);
        let r = find_root(|x| x * x * x - 2.0, 1.0, 2.0, 1e-10).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-9);
        assert!((r - 1.259_921).abs() < 1e-6);
    }

    #[test]
    fn missing_sign_change() {
        assert!(matches!(
            find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-9),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn flat_regions_still_terminate() {
        // Secant alone stalls on this step-like function.
        let r = find_root(|x: f64| (x - 0.3).signum() * (x - 0.3).abs().powf(0.1), -5.0, 7.0, 1e-12)
            .unwrap();
        assert!((r - 0.3).abs() < 1e-9);
    }
}
