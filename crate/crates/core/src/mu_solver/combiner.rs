//! Receive combiners, SINRs and the sum rate.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{CMatrix, CVector};
use crate::error::{Error, Result};

/// `w = h/‖h‖`.
pub fn mrc_combiner(h: &CVector) -> Result<CVector> {
    let n = h.norm();
    if !(n > 0.0) {
        return Err(Error::DegenerateChannel("zero channel has no MRC combiner".into()));
    }
    Ok(h / Complex64::new(n, 0.0))
}

/// Per-user SINRs and `Σ log₂(1+γ_k)` for combiner columns `W` and channel columns `H`.
pub fn sinr_and_sum_rate(w: &CMatrix, h: &CMatrix, powers: &[f64], noise: f64) -> (Vec<f64>, f64) {
    let k_count = h.ncols();
    let cross = w.adjoint() * h;
    let mut sinrs = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let signal = powers[k] * cross[(k, k)].norm_sqr();
        let mut denom = noise * w.column(k).norm_squared();
        for j in 0..k_count {
            if j != k {
                denom += powers[j] * cross[(k, j)].norm_sqr();
            }
        }
        sinrs.push(if denom > 0.0 { signal / denom } else { 0.0 });
    }
    let rate = sinrs.iter().map(|g| (1.0 + g).log2()).sum();
    (sinrs, rate)
}

pub fn sum_rate(w: &CMatrix, h: &CMatrix, powers: &[f64], noise: f64) -> f64 {
    sinr_and_sum_rate(w, h, powers, noise).1
}

/// Unit-norm MMSE combiners `w_k ∝ C_k⁻¹ h_k`.
pub fn mmse_combiners(h: &CMatrix, powers: &[f64], noise: f64) -> CMatrix {
    let (m, k_count) = h.shape();
    let mut total = DMatrix::<Complex64>::identity(m, m);
    for j in 0..k_count {
        let hj = h.column(j);
        total += hj * hj.adjoint() * Complex64::new(powers[j] / noise, 0.0);
    }
    let mut w = CMatrix::zeros(m, k_count);
    for k in 0..k_count {
        let hk = h.column(k).into_owned();
        let ck = &total - &hk * hk.adjoint() * Complex64::new(powers[k] / noise, 0.0);
        let sol = match ck.clone().cholesky() {
            Some(ch) => ch.solve(&hk),
            None => ck.lu().solve(&hk).unwrap_or_else(|| hk.clone()),
        };
        let n = sol.norm();
        let col = if n > 0.0 {
            sol / Complex64::new(n, 0.0)
        } else {
            let mut e = CVector::zeros(m);
            e[0] = Complex64::new(1.0, 0.0);
            e
        };
        w.set_column(k, &col);
    }
    w
}
