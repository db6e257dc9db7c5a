//! Channel constructors and the composite channel.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;

use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::geometry::{euler_rotation, irs_element_positions, irs_normal, ArrayGeometry, EulerOrientation};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Tolerance on `|v_n| = 1` accepted by [`composite_channel`].
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

/// Checks `n(ψ)ᵀ(b_0 − r_0) ≥ 0`, allowing round-off at the boundary.
pub fn check_visibility(geom: &ArrayGeometry, psi: EulerOrientation) -> Result<()> {
    let margin = geom.visibility(psi);
    if margin < -1e-12 * geom.bs_irs_distance() {
        Err(Error::InfeasibleOrientation { margin })
    } else {
        Ok(())
    }
}

/// Direct channels `h_{B,k}` as the columns of an `M × K` matrix.
pub fn user_bs_channel(scenario: &Scenario, geom: &ArrayGeometry, boresights: &[Vector3<f64>]) -> CMatrix {
    let m_count = geom.num_antennas();
    let mut out = CMatrix::zeros(m_count, scenario.num_users());
    for m in 0..m_count {
        for k in 0..scenario.num_users() {
            out[(m, k)] = direct_entry(scenario, geom, &boresights[m], m, k);
        }
    }
    out
}

pub(crate) fn direct_entry(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    f_m: &Vector3<f64>,
    m: usize,
    k: usize,
) -> Complex64 {
    let kc = geom.wavenumber();
    let amp = scenario.direct_amplitude();
    let off = &geom.bs_offsets[m];
    scenario.users[k]
        .direct
        .iter()
        .map(|p| {
            let s = scenario.bs_pattern.sqrt_gain(-f_m.dot(&p.direction));
            p.gain * Complex64::from_polar(amp * s, -kc * p.direction.dot(off))
        })
        .sum()
}

/// User–IRS channels `h_{R,k}` as the columns of an `N × K` matrix.
pub fn user_irs_channel(scenario: &Scenario, geom: &ArrayGeometry, psi: EulerOrientation) -> CMatrix {
    let kc = geom.wavenumber();
    let r = euler_rotation(psi);
    let normal = irs_normal(geom, psi);
    let rotated: Vec<Vector3<f64>> = geom.irs_reference_offsets.iter().map(|o| r * o).collect();
    let mut out = CMatrix::zeros(geom.num_elements(), scenario.num_users());
    for (k, user) in scenario.users.iter().enumerate() {
        for p in &user.reflected {
            let s = scenario.irs_pattern.sqrt_gain(-normal.dot(&p.direction));
            if s == 0.0 {
                continue;
            }
            let c = p.gain * s;
            for (n, off) in rotated.iter().enumerate() {
                out[(n, k)] += c * Complex64::from_polar(1.0, -kc * p.direction.dot(off));
            }
        }
    }
    out
}

/// Orientation-dependent part of the IRS–BS link, shared by every boresight choice.
#[derive(Debug, Clone)]
pub struct IrsBsLink {
    pub orientation: EulerOrientation,
    pub positions: Vec<Vector3<f64>>,
    pub normal: Vector3<f64>,
    num_elements: usize,
    /// `d_{n,m}`, row-major over `(m, n)`.
    pub distance: Vec<f64>,
    /// `d̂_{n,m} = (b_m − r_n)/d_{n,m}`, row-major over `(m, n)`.
    pub direction: Vec<Vector3<f64>>,
    /// `λ √G_ref /(4π d) e^{−j k d}`, row-major over `(m, n)`.
    pub base: Vec<Complex64>,
}

impl IrsBsLink {
    pub fn new(scenario: &Scenario, geom: &ArrayGeometry, psi: EulerOrientation) -> Result<Self> {
        check_visibility(geom, psi)?;
        let positions = irs_element_positions(geom, psi);
        let normal = irs_normal(geom, psi);
        let kc = geom.wavenumber();
        let lambda = geom.wavelength;
        let n_count = positions.len();
        let m_count = geom.num_antennas();
        let mut distance = Vec::with_capacity(m_count * n_count);
        let mut direction = Vec::with_capacity(m_count * n_count);
        let mut base = Vec::with_capacity(m_count * n_count);
        for m in 0..m_count {
            let b_m = geom.antenna_position(m);
            for r_n in &positions {
                let diff = b_m - r_n;
                let d = diff.norm();
                let dir = diff / d;
                let s = scenario.irs_pattern.sqrt_gain(normal.dot(&dir));
                distance.push(d);
                direction.push(dir);
                base.push(Complex64::from_polar(lambda * s / (4.0 * PI * d), -kc * d));
            }
        }
        Ok(Self {
            orientation: psi,
            positions,
            normal,
            num_elements: n_count,
            distance,
            direction,
            base,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn index(&self, m: usize, n: usize) -> usize {
        m * self.num_elements + n
    }

    /// Fills row `m` of `H_RB` for boresight `f_m`.
    pub fn fill_row(&self, scenario: &Scenario, m: usize, f_m: &Vector3<f64>, row: &mut [Complex64]) {
        let start = m * self.num_elements;
        for n in 0..self.num_elements {
            let i = start + n;
            let s = scenario.bs_pattern.sqrt_gain(-f_m.dot(&self.direction[i]));
            row[n] = self.base[i] * s;
        }
    }

    pub fn matrix(&self, scenario: &Scenario, boresights: &[Vector3<f64>]) -> CMatrix {
        let mut h = CMatrix::zeros(boresights.len(), self.num_elements);
        let mut row = vec![Complex64::new(0.0, 0.0); self.num_elements];
        for (m, f_m) in boresights.iter().enumerate() {
            self.fill_row(scenario, m, f_m, &mut row);
            for (n, v) in row.iter().enumerate() {
                h[(m, n)] = *v;
            }
        }
        h
    }
}

/// Near-field IRS–BS matrix `H_RB` (`M × N`).
pub fn irs_bs_channel(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    boresights: &[Vector3<f64>],
    psi: EulerOrientation,
) -> Result<CMatrix> {
    Ok(IrsBsLink::new(scenario, geom, psi)?.matrix(scenario, boresights))
}

/// Rank-one far-field factors `H_FF = c_RB u_B u_Rᵀ`.
#[derive(Debug, Clone)]
pub struct FarFieldFactors {
    pub c_rb: Complex64,
    pub u_b: CVector,
    pub u_r: CVector,
}

impl FarFieldFactors {
    pub fn matrix(&self) -> CMatrix {
        &self.u_b * self.u_r.transpose() * self.c_rb
    }
}

pub fn irs_bs_channel_farfield(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    boresights: &[Vector3<f64>],
    psi: EulerOrientation,
) -> Result<FarFieldFactors> {
    check_visibility(geom, psi)?;
    let kc = geom.wavenumber();
    let d_rb = geom.bs_irs_distance();
    let d0 = geom.reference_normal;
    let c_rb = Complex64::from_polar(geom.wavelength / (4.0 * PI * d_rb), -kc * d_rb);
    let u_b = CVector::from_iterator(
        geom.num_antennas(),
        boresights
            .iter()
            .zip(&geom.bs_offsets)
            .map(|(f, off)| Complex64::from_polar(scenario.bs_pattern.sqrt_gain(-f.dot(&d0)), -kc * d0.dot(off))),
    );
    let r = euler_rotation(psi);
    let s = scenario.irs_pattern.sqrt_gain(irs_normal(geom, psi).dot(&d0));
    let u_r = CVector::from_iterator(
        geom.num_elements(),
        geom.irs_reference_offsets
            .iter()
            .map(|off| Complex64::from_polar(s, kc * d0.dot(&(r * off)))),
    );
    Ok(FarFieldFactors { c_rb, u_b, u_r })
}

fn check_unit_modulus(v: &CVector) -> Result<()> {
    for (n, x) in v.iter().enumerate() {
        if (x.norm() - 1.0).abs() > UNIT_MODULUS_TOL {
            return Err(Error::InvalidArgument(format!(
                "phase entry {n} has modulus {}",
                x.norm()
            )));
        }
    }
    Ok(())
}

/// `h_k = h_{B,k} + H_RB diag(v) h_{R,k}` for every user column.
pub fn composite_channel(direct: &CMatrix, irs_bs: &CMatrix, v: &CVector, incident: &CMatrix) -> Result<CMatrix> {
    check_unit_modulus(v)?;
    Ok(compose_unchecked(direct, irs_bs, v, incident))
}

pub(crate) fn compose_unchecked(direct: &CMatrix, irs_bs: &CMatrix, v: &CVector, incident: &CMatrix) -> CMatrix {
    let mut weighted = incident.clone();
    for mut col in weighted.column_iter_mut() {
        col.component_mul_assign(v);
    }
    direct + irs_bs * weighted
}

/// All channels for one `(Θ, ψ, v)`.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub boresights: Vec<Vector3<f64>>,
    pub link: IrsBsLink,
    /// `M × K`, column k is `h_{B,k}`.
    pub direct: CMatrix,
    /// `N × K`, column k is `h_{R,k}`.
    pub incident: CMatrix,
    /// `M × N`.
    pub irs_bs: CMatrix,
    pub phases: CVector,
    /// `M × K`, column k is `h_k`.
    pub composite: CMatrix,
}

impl ChannelSet {
    pub fn build(
        scenario: &Scenario,
        geom: &ArrayGeometry,
        boresights: &[Vector3<f64>],
        psi: EulerOrientation,
        phases: &CVector,
    ) -> Result<Self> {
        if boresights.len() != geom.num_antennas() {
            return Err(Error::InvalidArgument(format!(
                "expected {} boresights, got {}",
                geom.num_antennas(),
                boresights.len()
            )));
        }
        if phases.len() != geom.num_elements() {
            return Err(Error::InvalidArgument(format!(
                "expected {} phases, got {}",
                geom.num_elements(),
                phases.len()
            )));
        }
        let link = IrsBsLink::new(scenario, geom, psi)?;
        let direct = user_bs_channel(scenario, geom, boresights);
        let incident = user_irs_channel(scenario, geom, psi);
        let irs_bs = link.matrix(scenario, boresights);
        let composite = composite_channel(&direct, &irs_bs, phases, &incident)?;
        Ok(Self {
            boresights: boresights.to_vec(),
            link,
            direct,
            incident,
            irs_bs,
            phases: phases.clone(),
            composite,
        })
    }

    pub fn num_users(&self) -> usize {
        self.direct.ncols()
    }

    pub fn num_antennas(&self) -> usize {
        self.direct.nrows()
    }

    pub fn num_elements(&self) -> usize {
        self.incident.nrows()
    }

    pub fn orientation(&self) -> EulerOrientation {
        self.link.orientation
    }

    /// Replaces `v` and recomposes.
    pub fn set_phases(&mut self, phases: &CVector) -> Result<()> {
        self.composite = composite_channel(&self.direct, &self.irs_bs, phases, &self.incident)?;
        self.phases = phases.clone();
        Ok(())
    }

    /// Replaces one boresight; only row `m` of each channel changes.
    pub fn set_boresight(&mut self, scenario: &Scenario, geom: &ArrayGeometry, m: usize, f_m: Vector3<f64>) {
        self.boresights[m] = f_m;
        let mut row = vec![Complex64::new(0.0, 0.0); self.num_elements()];
        self.link.fill_row(scenario, m, &f_m, &mut row);
        for (n, x) in row.iter().enumerate() {
            self.irs_bs[(m, n)] = *x;
        }
        for k in 0..self.num_users() {
            let d = direct_entry(scenario, geom, &f_m, m, k);
            self.direct[(m, k)] = d;
            let refl: Complex64 = row
                .iter()
                .zip(self.phases.iter())
                .zip(self.incident.column(k).iter())
                .map(|((h, v), r)| h * v * r)
                .sum();
            self.composite[(m, k)] = d + refl;
        }
    }

    /// Cascade columns `A_k = H_RB diag(h_{R,k})`.
    pub fn cascade(&self, k: usize) -> CMatrix {
        let mut a = self.irs_bs.clone();
        for (n, mut col) in a.column_iter_mut().enumerate() {
            col *= self.incident[(n, k)];
        }
        a
    }
}
