//! Array layouts, boresight parameterization and IRS rigid-body rotation.
//!
//! Global frame: the BS uniform planar array lies in the x–z plane with its
//! normal along +y. Elevation is measured from +y, azimuth in the x–z plane
//! from +x toward +z. The IRS orientation is an active rotation
//! `R(ψ) = R_x(φ) R_y(β) R_z(α)` applied to the reference layout.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Matrix3x2, Vector3};

use crate::error::{Error, Result};

/// Reference boresight direction (BS array normal).
pub const BORESIGHT_REF: Vector3<f64> = Vector3::new(0.0, 1.0, 0.0);

/// Elevation/azimuth of one rotatable antenna, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoresightAngles {
    pub elevation: f64,
    pub azimuth: f64,
}

impl BoresightAngles {
    /// Builds angles with azimuth wrapped to `[0, 2π)`.
    pub fn new(elevation: f64, azimuth: f64) -> Self {
        Self {
            elevation,
            azimuth: wrap_azimuth(azimuth),
        }
    }

    /// The reference boresight `[0, 1, 0]`.
    pub fn reference() -> Self {
        Self::new(0.0, 0.0)
    }

    /// Clamps elevation to `[0, theta_max]` and rewraps azimuth.
    pub fn project(self, theta_max: f64) -> Self {
        Self::new(self.elevation.clamp(0.0, theta_max), self.azimuth)
    }
}

pub(crate) fn wrap_azimuth(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Euler angles `ψ = (α, β, φ)` of the IRS panel, radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerOrientation {
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
}

impl EulerOrientation {
    pub fn new(alpha: f64, beta: f64, phi: f64) -> Self {
        Self { alpha, beta, phi }
    }

    /// The BS-facing reference orientation `ψ = 0`.
    pub fn reference() -> Self {
        Self::default()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.alpha, self.beta, self.phi]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.alpha, self.beta, self.phi)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Symmetric box limits `|α| ≤ α_max`, `|β| ≤ β_max`, `|φ| ≤ φ_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationLimits {
    pub alpha_max: f64,
    pub beta_max: f64,
    pub phi_max: f64,
}

impl OrientationLimits {
    pub fn uniform(limit: f64) -> Self {
        Self {
            alpha_max: limit,
            beta_max: limit,
            phi_max: limit,
        }
    }

    pub fn upper(&self) -> Vector3<f64> {
        Vector3::new(self.alpha_max, self.beta_max, self.phi_max)
    }

    pub fn contains(&self, psi: &EulerOrientation) -> bool {
        psi.alpha.abs() <= self.alpha_max && psi.beta.abs() <= self.beta_max && psi.phi.abs() <= self.phi_max
    }

    pub fn clamp(&self, psi: &EulerOrientation) -> EulerOrientation {
        EulerOrientation::new(
            psi.alpha.clamp(-self.alpha_max, self.alpha_max),
            psi.beta.clamp(-self.beta_max, self.beta_max),
            psi.phi.clamp(-self.phi_max, self.phi_max),
        )
    }
}

/// Selects one Euler angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerAxis {
    Alpha,
    Beta,
    Phi,
}

impl EulerAxis {
    pub const ALL: [EulerAxis; 3] = [EulerAxis::Alpha, EulerAxis::Beta, EulerAxis::Phi];

    pub fn index(self) -> usize {
        match self {
            EulerAxis::Alpha => 0,
            EulerAxis::Beta => 1,
            EulerAxis::Phi => 2,
        }
    }
}

/// Unit boresight `[sin e cos a, cos e, sin e sin a]`.
pub fn boresight_vector(angles: BoresightAngles) -> Vector3<f64> {
    let (se, ce) = angles.elevation.sin_cos();
    let (sa, ca) = angles.azimuth.sin_cos();
    Vector3::new(se * ca, ce, se * sa)
}

/// `∂f/∂(e, a)`, columns ordered elevation then azimuth.
pub fn boresight_jacobian(angles: BoresightAngles) -> Matrix3x2<f64> {
    let (se, ce) = angles.elevation.sin_cos();
    let (sa, ca) = angles.azimuth.sin_cos();
    Matrix3x2::new(ce * ca, -se * sa, -se, 0.0, ce * sa, se * ca)
}

/// Inverse of [`boresight_vector`] on the elevation cap.
///
/// The azimuth is reported as 0 at the pole, where it is undefined.
pub fn angles_from_boresight(f: &Vector3<f64>, theta_max: f64) -> Result<BoresightAngles> {
    let norm = f.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "boresight must be unit norm, got {norm}"
        )));
    }
    let limit = theta_max.cos();
    if f[1] < limit - 1e-9 {
        return Err(Error::OutsideCap { cos: f[1], limit });
    }
    let elevation = f[1].clamp(-1.0, 1.0).acos();
    let azimuth = if f[0].hypot(f[2]) < 1e-15 {
        0.0
    } else {
        f[2].atan2(f[0])
    };
    Ok(BoresightAngles::new(elevation, azimuth))
}

fn rot_x(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn drot_x(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn drot_y(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn drot_z(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// `R(ψ) = R_x(φ) R_y(β) R_z(α)`.
pub fn euler_rotation(psi: EulerOrientation) -> Matrix3<f64> {
    rot_x(psi.phi) * rot_y(psi.beta) * rot_z(psi.alpha)
}

/// Entrywise partial derivative of [`euler_rotation`] w.r.t. one angle.
pub fn euler_rotation_partial(psi: EulerOrientation, axis: EulerAxis) -> Matrix3<f64> {
    match axis {
        EulerAxis::Alpha => rot_x(psi.phi) * rot_y(psi.beta) * drot_z(psi.alpha),
        EulerAxis::Beta => rot_x(psi.phi) * drot_y(psi.beta) * rot_z(psi.alpha),
        EulerAxis::Phi => drot_x(psi.phi) * rot_y(psi.beta) * rot_z(psi.alpha),
    }
}

/// Rotation variables: per-antenna boresights `Θ` and IRS orientation `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationState {
    pub boresights: Vec<BoresightAngles>,
    pub orientation: EulerOrientation,
}

impl RotationState {
    /// All boresights at `f_ref` and `ψ = 0`.
    pub fn reference(num_antennas: usize) -> Self {
        Self {
            boresights: vec![BoresightAngles::reference(); num_antennas],
            orientation: EulerOrientation::reference(),
        }
    }

    pub fn boresight_vectors(&self) -> Vec<Vector3<f64>> {
        self.boresights.iter().map(|&a| boresight_vector(a)).collect()
    }

    /// Elevations within the cap and `ψ` inside the box.
    pub fn within_limits(&self, theta_max: f64, limits: &OrientationLimits) -> bool {
        self.boresights
            .iter()
            .all(|a| a.elevation >= 0.0 && a.elevation <= theta_max + 1e-12)
            && limits.contains(&self.orientation)
    }
}

/// Inputs to [`ArrayGeometry::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    pub wavelength: f64,
    pub bs_center: Vector3<f64>,
    /// BS grid size along x.
    pub bs_cols: usize,
    /// BS grid size along z.
    pub bs_rows: usize,
    pub bs_spacing: f64,
    pub irs_center: Vector3<f64>,
    /// Elements per IRS side (square panel).
    pub irs_side: usize,
    pub irs_spacing: f64,
}

/// BS and IRS layouts in the global frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub bs_center: Vector3<f64>,
    pub bs_offsets: Vec<Vector3<f64>>,
    pub irs_center: Vector3<f64>,
    /// Reference element offsets, orthogonal to `reference_normal`.
    pub irs_reference_offsets: Vec<Vector3<f64>>,
    /// Unit vector from the IRS center toward the BS center.
    pub reference_normal: Vector3<f64>,
    pub wavelength: f64,
    pub irs_spacing: f64,
    pub irs_side: usize,
    pub bs_spacing: f64,
    pub bs_cols: usize,
    pub bs_rows: usize,
}

fn centered(i: usize, n: usize) -> f64 {
    i as f64 - (n as f64 - 1.0) / 2.0
}

impl ArrayGeometry {
    pub fn build(p: &GeometryParams) -> Result<Self> {
        let bad = |field: &str, reason: &str| Error::InvalidConfig {
            field: field.to_string(),
            reason: reason.to_string(),
        };
        if !(p.wavelength > 0.0) {
            return Err(bad("wavelength", "must be positive"));
        }
        if p.bs_cols == 0 || p.bs_rows == 0 {
            return Err(bad("bs_cols/bs_rows", "BS grid must be non-empty"));
        }
        if p.irs_side == 0 {
            return Err(bad("irs_side", "IRS grid must be non-empty"));
        }
        if !(p.bs_spacing > 0.0) {
            return Err(bad("bs_spacing", "must be positive"));
        }
        if !(p.irs_spacing > 0.0) {
            return Err(bad("irs_spacing", "must be positive"));
        }
        let sep = p.bs_center - p.irs_center;
        let dist = sep.norm();
        if !(dist > 0.0) {
            return Err(bad("irs_center", "IRS and BS centers coincide"));
        }
        let n0 = sep / dist;

        let mut bs_offsets = Vec::with_capacity(p.bs_cols * p.bs_rows);
        for iz in 0..p.bs_rows {
            for ix in 0..p.bs_cols {
                bs_offsets.push(Vector3::new(
                    centered(ix, p.bs_cols) * p.bs_spacing,
                    0.0,
                    centered(iz, p.bs_rows) * p.bs_spacing,
                ));
            }
        }

        // In-plane basis: Gram–Schmidt from global z (fall back to x when n0 ∥ z).
        let mut seed = Vector3::z();
        if (seed - n0 * n0.dot(&seed)).norm() < 1e-9 {
            seed = Vector3::x();
        }
        let e1 = (seed - n0 * n0.dot(&seed)).normalize();
        let e2 = n0.cross(&e1);
        let mut irs_offsets = Vec::with_capacity(p.irs_side * p.irs_side);
        for iz in 0..p.irs_side {
            for iy in 0..p.irs_side {
                irs_offsets.push(
                    e2 * (centered(iy, p.irs_side) * p.irs_spacing) + e1 * (centered(iz, p.irs_side) * p.irs_spacing),
                );
            }
        }

        Ok(Self {
            bs_center: p.bs_center,
            bs_offsets,
            irs_center: p.irs_center,
            irs_reference_offsets: irs_offsets,
            reference_normal: n0,
            wavelength: p.wavelength,
            irs_spacing: p.irs_spacing,
            irs_side: p.irs_side,
            bs_spacing: p.bs_spacing,
            bs_cols: p.bs_cols,
            bs_rows: p.bs_rows,
        })
    }

    pub fn params(&self) -> GeometryParams {
        GeometryParams {
            wavelength: self.wavelength,
            bs_center: self.bs_center,
            bs_cols: self.bs_cols,
            bs_rows: self.bs_rows,
            bs_spacing: self.bs_spacing,
            irs_center: self.irs_center,
            irs_side: self.irs_side,
            irs_spacing: self.irs_spacing,
        }
    }

    /// Same layout with the IRS center moved; the reference normal follows.
    pub fn with_irs_center(&self, irs_center: Vector3<f64>) -> Result<Self> {
        let mut p = self.params();
        p.irs_center = irs_center;
        Self::build(&p)
    }

    pub fn num_antennas(&self) -> usize {
        self.bs_offsets.len()
    }

    pub fn num_elements(&self) -> usize {
        self.irs_reference_offsets.len()
    }

    pub fn wavenumber(&self) -> f64 {
        std::f64::consts::TAU / self.wavelength
    }

    pub fn antenna_position(&self, m: usize) -> Vector3<f64> {
        self.bs_center + self.bs_offsets[m]
    }

    /// `L_R = (N_side − 1) d_IRS`.
    pub fn irs_side_length(&self) -> f64 {
        (self.irs_side as f64 - 1.0) * self.irs_spacing
    }

    /// `D_R = √2 L_R`.
    pub fn irs_diagonal(&self) -> f64 {
        self.irs_side_length() * std::f64::consts::SQRT_2
    }

    pub fn bs_diagonal(&self) -> f64 {
        let lx = (self.bs_cols as f64 - 1.0) * self.bs_spacing;
        let lz = (self.bs_rows as f64 - 1.0) * self.bs_spacing;
        lx.hypot(lz)
    }

    /// Center-to-center IRS–BS distance `d_RB`.
    pub fn bs_irs_distance(&self) -> f64 {
        (self.bs_center - self.irs_center).norm()
    }

    /// Aperture-to-distance ratio `ξ = D_R / d_RB`.
    pub fn xi(&self) -> f64 {
        self.irs_diagonal() / self.bs_irs_distance()
    }

    /// IRS Rayleigh distance `2 D_R² / λ`.
    pub fn irs_rayleigh_distance(&self) -> f64 {
        2.0 * self.irs_diagonal().powi(2) / self.wavelength
    }

    /// Visibility margin `g_vis(ψ) = n(ψ)ᵀ(b_0 − r_0)`; feasible when ≥ 0.
    pub fn visibility(&self, psi: EulerOrientation) -> f64 {
        irs_normal(self, psi).dot(&(self.bs_center - self.irs_center))
    }

    /// `∇_ψ g_vis`.
    pub fn visibility_gradient(&self, psi: EulerOrientation) -> Vector3<f64> {
        let sep = self.bs_center - self.irs_center;
        Vector3::from_iterator(
            EulerAxis::ALL
                .iter()
                .map(|&ax| (euler_rotation_partial(psi, ax) * self.reference_normal).dot(&sep)),
        )
    }
}

/// `r_n(ψ) = r_0 + R(ψ) r̄_n` for every element.
pub fn irs_element_positions(geom: &ArrayGeometry, psi: EulerOrientation) -> Vec<Vector3<f64>> {
    let r = euler_rotation(psi);
    geom.irs_reference_offsets
        .iter()
        .map(|off| geom.irs_center + r * off)
        .collect()
}

/// `n(ψ) = R(ψ) n_0`.
pub fn irs_normal(geom: &ArrayGeometry, psi: EulerOrientation) -> Vector3<f64> {
    euler_rotation(psi) * geom.reference_normal
}
