//! Projections onto the boresight cap and the orientation feasible set.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{OrientationLimits, BORESIGHT_REF};

/// Normalizes `f` and pulls it back onto the cap `fᵀf_ref ≥ cos θ_max`.
///
/// A vector antiparallel to `f_ref` is rotated within the x–y plane.
pub fn cap_project(f: &Vector3<f64>, theta_max: f64) -> Result<Vector3<f64>> {
    let norm = f.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument("cannot project a zero boresight".into()));
    }
    let u = f / norm;
    let (s, c) = theta_max.sin_cos();
    if u.dot(&BORESIGHT_REF) >= c {
        return Ok(u);
    }
    let perp = u - BORESIGHT_REF * u.dot(&BORESIGHT_REF);
    let pn = perp.norm();
    let side = if pn < 1e-15 { Vector3::x() } else { perp / pn };
    Ok(BORESIGHT_REF * c + side * s)
}

/// Half-space `{x : aᵀx ≥ b}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Halfspace {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Halfspace {
    /// First-order model `g(x₀) + ∇gᵀ(x − x₀) ≥ 0` of a constraint `g ≥ 0`.
    pub fn linearized(value: f64, gradient: Vector3<f64>, at: Vector3<f64>) -> Self {
        Self {
            normal: gradient,
            offset: gradient.dot(&at) - value,
        }
    }

    pub fn contains(&self, x: &Vector3<f64>, tol: f64) -> bool {
        self.normal.dot(x) >= self.offset - tol
    }

    pub fn project(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let nn = self.normal.norm_squared();
        let gap = self.offset - self.normal.dot(x);
        if gap <= 0.0 || nn == 0.0 {
            *x
        } else {
            x + self.normal * (gap / nn)
        }
    }
}

pub fn box_project(x: &Vector3<f64>, limits: &OrientationLimits) -> Vector3<f64> {
    let u = limits.upper();
    Vector3::new(
        x[0].clamp(-u[0], u[0]),
        x[1].clamp(-u[1], u[1]),
        x[2].clamp(-u[2], u[2]),
    )
}

/// Rounds and final increment (iterate plus both corrections) of a Dykstra run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DykstraInfo {
    pub rounds: usize,
    pub increment: f64,
}

pub const DYKSTRA_TOL: f64 = 1e-10;
pub const DYKSTRA_MAX_ROUNDS: usize = 1000;

/// Euclidean projection of `trial` onto `box ∩ halfspace` by Dykstra's
/// alternating corrected projections.
pub fn dykstra_project(
    trial: &Vector3<f64>,
    limits: &OrientationLimits,
    halfspace: &Halfspace,
) -> (Vector3<f64>, DykstraInfo) {
    let mut x = *trial;
    let mut p = Vector3::zeros();
    let mut q = Vector3::zeros();
    let mut info = DykstraInfo {
        rounds: 0,
        increment: f64::INFINITY,
    };
    while info.rounds < DYKSTRA_MAX_ROUNDS {
        let y = box_project(&(x + p), limits);
        let p_new = x + p - y;
        let x_new = halfspace.project(&(y + q));
        let q_new = y + q - x_new;
        info.rounds += 1;
        info.increment = (x_new - x).norm() + (p_new - p).norm() + (q_new - q).norm();
        p = p_new;
        q = q_new;
        x = x_new;
        if info.increment < DYKSTRA_TOL {
            break;
        }
    }
    (box_project(&x, limits), info)
}
