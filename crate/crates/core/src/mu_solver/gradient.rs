//! Sum-rate gradients w.r.t. boresight vectors and the IRS orientation.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;

use crate::channel::{channel_derivative_boresight, channel_derivative_orientation, CMatrix, ChannelSet, Scenario};
use crate::geometry::ArrayGeometry;

/// Which rotation variable a gradient is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientTarget {
    Boresight(usize),
    Orientation,
}

/// Weights `c_{k,j}` such that `dR = Σ_{k,j} Re{c_{k,j} w_kᴴ dh_j}`.
///
/// The diagonal carries the signal weight, the off-diagonal entries the
/// interference weights `−γ_k` times the signal-form factor.
pub fn sum_rate_weights(w: &CMatrix, h: &CMatrix, powers: &[f64], noise: f64) -> DMatrix<Complex64> {
    let k_count = h.ncols();
    let cross = w.adjoint() * h;
    let mut out = DMatrix::zeros(k_count, k_count);
    for k in 0..k_count {
        let noise_k = noise * w.column(k).norm_squared();
        let total: f64 = (0..k_count).map(|j| powers[j] * cross[(k, j)].norm_sqr()).sum::<f64>() + noise_k;
        let interference = total - powers[k] * cross[(k, k)].norm_sqr();
        let sinr = if interference > 0.0 {
            powers[k] * cross[(k, k)].norm_sqr() / interference
        } else {
            0.0
        };
        for j in 0..k_count {
            let sign = if j == k { 1.0 } else { -sinr };
            out[(k, j)] = cross[(k, j)].conj() * (2.0 / LN_2 * powers[j] * sign / total);
        }
    }
    out
}

/// Real 3-vector gradient of `R_sum` w.r.t. `f_m` (all three components free) or `ψ`.
pub fn sum_rate_gradient(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    channels: &ChannelSet,
    w: &CMatrix,
    target: GradientTarget,
) -> Vector3<f64> {
    let coef = sum_rate_weights(w, &channels.composite, &scenario.powers, scenario.noise);
    let k_count = channels.num_users();
    let mut g = Vector3::zeros();
    match target {
        GradientTarget::Boresight(m) => {
            let rows = channel_derivative_boresight(scenario, geom, channels, m);
            for k in 0..k_count {
                let wk = w[(m, k)].conj();
                for (j, row) in rows.iter().enumerate() {
                    let c = coef[(k, j)] * wk;
                    for i in 0..3 {
                        g[i] += (c * row[i]).re;
                    }
                }
            }
        }
        GradientTarget::Orientation => {
            let d = channel_derivative_orientation(scenario, geom, channels);
            for i in 0..3 {
                let proj = w.adjoint() * &d[i];
                g[i] = coef.component_mul(&proj).iter().map(|c| c.re).sum();
            }
        }
    }
    g
}
