use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{require_pd, require_psd, Weights};

/// Backward Riccati sequence over a horizon of `N` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    /// `S_0, …, S_N` with `S_N = Q0`.
    pub s: Vec<DMatrix<f64>>,
    /// `L_0, …, L_{N-1}`.
    pub l: Vec<DMatrix<f64>>,
    /// `Q2 + Bᵀ S_{k+1} B` for `k = 0, …, N-1`.
    pub gram: Vec<DMatrix<f64>>,
}

impl RiccatiSolution {
    pub fn horizon(&self) -> usize {
        self.l.len()
    }
}

pub fn riccati_backward(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    weights: &Weights,
    horizon: usize,
) -> Result<RiccatiSolution> {
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n {
        return Err(Error::Dimension(format!(
            "A is {}x{} and B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let (q0, q1, q2) = (&weights.q0, &weights.q1, &weights.q2);
    if q0.shape() != (n, n) || q1.shape() != (n, n) || q2.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "weights do not match state dimension {n} and input dimension {m}"
        )));
    }
    require_psd("Q0", q0)?;
    require_psd("Q1", q1)?;
    require_pd("Q2", q2)?;
    let mut s = vec![DMatrix::zeros(n, n); horizon + 1];
    let mut l = vec![DMatrix::zeros(m, n); horizon];
    let mut gram = vec![DMatrix::zeros(m, m); horizon];
    s[horizon] = q0.clone();
    for k in (0..horizon).rev() {
        let next = &s[k + 1];
        let g = q2 + b.transpose() * next * b;
        let bsa = b.transpose() * next * a;
        let singular = || Error::Numerical(format!("Q2 + BᵀSB is singular at k = {k}"));
        // A single input needs a division; Cholesky would round through sqrt.
        let gain = if m == 1 {
            let g00 = g[(0, 0)];
            if !(g00 > 0.0) {
                return Err(singular());
            }
            &bsa / g00
        } else {
            g.clone().cholesky().ok_or_else(singular)?.solve(&bsa)
        };
        let sk = q1 + a.transpose() * next * a - bsa.transpose() * &gain;
        s[k] = (&sk + sk.transpose()) * 0.5;
        l[k] = gain;
        gram[k] = g;
    }
    Ok(RiccatiSolution { s, l, gram })
}

/// `u_k = -L_k x̂_{k|k}`.
pub fn ce_control(l: &DMatrix<f64>, xhat: &DVector<f64>) -> DVector<f64> {
    -(l * xhat)
}

/// `x̂_0ᵀ S_0 x̂_0 + tr(S_0 P_0) + Σ_n tr(S_{n+1} Rw) + tr(L_nᵀ G_n L_n P_{n|n})`
/// where `P_0` is the prior covariance around `x̂_0` and `p_nn[n]` the filtered
/// error covariance at step `n`.
pub fn jdp_closed_form(
    ric: &RiccatiSolution,
    xhat0: &DVector<f64>,
    p0: &DMatrix<f64>,
    rw: &DMatrix<f64>,
    p_nn: &[DMatrix<f64>],
) -> Result<f64> {
    let n_steps = ric.horizon();
    if p_nn.len() != n_steps {
        return Err(Error::Dimension(format!(
            "expected {n_steps} filtered covariances, got {}",
            p_nn.len()
        )));
    }
    let s0 = &ric.s[0];
    let mut j = (xhat0.transpose() * s0 * xhat0)[(0, 0)] + (s0 * p0).trace();
    for (k, p) in p_nn.iter().enumerate() {
        let l = &ric.l[k];
        j += (&ric.s[k + 1] * rw).trace() + (l.transpose() * &ric.gram[k] * l * p).trace();
    }
    Ok(j)
}
