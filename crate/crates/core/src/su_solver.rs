//! Single-user alternating maximization of the received channel power `‖h‖²`.

use nalgebra::Vector3;

use crate::channel::{
    channel_derivative_boresight, channel_derivative_orientation, CMatrix, CVector, ChannelSet, Scenario,
};
use crate::error::{Error, Result};
use crate::geometry::{
    angles_from_boresight, boresight_jacobian, boresight_vector, ArrayGeometry, BoresightAngles, EulerOrientation,
    RotationState,
};
pub use crate::mu_solver::combiner::mrc_combiner;
use crate::mu_solver::projection::{dykstra_project, Halfspace};
use crate::mu_solver::{AoInit, RotationBounds};

/// Cascade columns `a_n = [h_R]_n · H_RB[:, n]`, so that `A v = H_RB diag(v) h_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeColumns {
    pub a: CMatrix,
}

impl CascadeColumns {
    pub fn new(a: CMatrix) -> Self {
        Self { a }
    }

    /// Columns for user `k` of a channel set.
    pub fn from_channels(channels: &ChannelSet, k: usize) -> Self {
        Self { a: channels.cascade(k) }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.a * v
    }

    pub fn num_elements(&self) -> usize {
        self.a.ncols()
    }
}

/// One pass `n = 1..N` of closed-form coordinate updates of `‖h_B + A v‖²`.
pub fn bcd_phase_sweep(h_b: &CVector, a: &CascadeColumns, v: &CVector) -> CVector {
    let mut v = v.clone();
    let mut total = h_b + a.apply(&v);
    for n in 0..a.num_elements() {
        let col = a.a.column(n);
        let rest = &total - col * v[n];
        let eta = col.dotc(&rest);
        if eta.norm() == 0.0 {
            continue;
        }
        let vn = eta / eta.norm();
        total = rest + col * vn;
        v[n] = vn;
    }
    v
}

/// Repeated sweeps until the relative objective change is at most `tol` or `max_sweeps` have run.
pub fn bcd_optimize(h_b: &CVector, a: &CascadeColumns, v0: &CVector, max_sweeps: usize, tol: f64) -> (CVector, f64) {
    let mut v = v0.clone();
    let mut value = (h_b + a.apply(&v)).norm_squared();
    for _ in 0..max_sweeps {
        let next = bcd_phase_sweep(h_b, a, &v);
        let next_value = (h_b + a.apply(&next)).norm_squared();
        let change = (next_value - value).abs() / value.max(f64::MIN_POSITIVE);
        v = next;
        value = next_value;
        if change <= tol {
            break;
        }
    }
    (v, value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuControls {
    pub tol: f64,
    pub max_iters: usize,
    pub bcd_sweeps: usize,
    pub bcd_tol: f64,
    pub step_max: f64,
    pub step_min: f64,
    pub backtrack: f64,
    pub bounds: RotationBounds,
    pub rotate_bs: bool,
    pub rotate_irs: bool,
}

impl SuControls {
    pub fn new(bounds: RotationBounds) -> Self {
        Self {
            tol: 1e-6,
            max_iters: 100,
            bcd_sweeps: 3,
            bcd_tol: 1e-8,
            step_max: 1.0,
            step_min: 1e-6,
            backtrack: 0.5,
            bounds,
            rotate_bs: true,
            rotate_irs: true,
        }
    }
}

/// Mutable single-user solver state.
#[derive(Debug, Clone)]
pub struct SuState {
    pub angles: Vec<BoresightAngles>,
    pub channels: ChannelSet,
}

impl SuState {
    pub fn new(scenario: &Scenario, geom: &ArrayGeometry, init: &AoInit) -> Result<Self> {
        if scenario.num_users() != 1 {
            return Err(Error::InvalidArgument(format!(
                "single-user solver needs one user, got {}",
                scenario.num_users()
            )));
        }
        let channels = ChannelSet::build(
            scenario,
            geom,
            &init.state.boresight_vectors(),
            init.state.orientation,
            &init.phases,
        )?;
        Ok(Self {
            angles: init.state.boresights.clone(),
            channels,
        })
    }

    /// `F = ‖h‖²`.
    pub fn power(&self) -> f64 {
        self.channels.composite.column(0).norm_squared()
    }

    pub fn channel(&self) -> CVector {
        self.channels.composite.column(0).into_owned()
    }

    pub fn rotation_state(&self) -> RotationState {
        RotationState {
            boresights: self.angles.clone(),
            orientation: self.channels.orientation(),
        }
    }
}

/// Box projection of boresight angles; a negative elevation is first folded
/// through the pole, which leaves the boresight vector unchanged.
pub fn project_angles(elevation: f64, azimuth: f64, theta_max: f64) -> BoresightAngles {
    let (e, a) = if elevation < 0.0 {
        (-elevation, azimuth + std::f64::consts::PI)
    } else {
        (elevation, azimuth)
    };
    BoresightAngles::new(e.min(theta_max), a)
}

/// `∇_{θ_m} F` in (elevation, azimuth) coordinates.
pub fn boresight_angle_gradient(scenario: &Scenario, geom: &ArrayGeometry, state: &SuState, m: usize) -> [f64; 2] {
    let row = channel_derivative_boresight(scenario, geom, &state.channels, m)[0];
    let h_m = state.channels.composite[(m, 0)].conj();
    let gf = Vector3::from_fn(|i, _| 2.0 * (h_m * row[i]).re);
    let g = boresight_jacobian(state.angles[m]).transpose() * gf;
    [g[0], g[1]]
}

/// `∇_ψ F`.
pub fn orientation_power_gradient(scenario: &Scenario, geom: &ArrayGeometry, state: &SuState) -> Vector3<f64> {
    let d = channel_derivative_orientation(scenario, geom, &state.channels);
    let h = state.channels.composite.column(0);
    Vector3::from_fn(|i, _| 2.0 * h.dotc(&d[i].column(0)).re)
}

/// Projected-gradient step on antenna `m` with backtracking; `scale` multiplies
/// the gradient. Returns whether a step was accepted.
pub fn su_boresight_step(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    state: &mut SuState,
    m: usize,
    controls: &SuControls,
    scale: f64,
) -> bool {
    let g = boresight_angle_gradient(scenario, geom, state, m);
    if g == [0.0, 0.0] || !g.iter().all(|x| x.is_finite()) {
        return false;
    }
    let power = state.power();
    let old = state.angles[m];
    let mut step = controls.step_max;
    while step >= controls.step_min {
        let cand = project_angles(
            old.elevation + step * scale * g[0],
            old.azimuth + step * scale * g[1],
            controls.bounds.theta_max,
        );
        if cand != old {
            state.channels.set_boresight(scenario, geom, m, boresight_vector(cand));
            if state.power() >= power {
                state.angles[m] = cand;
                return true;
            }
        }
        step *= controls.backtrack;
    }
    state.channels.set_boresight(scenario, geom, m, boresight_vector(old));
    false
}

/// Projected-gradient orientation step onto `box ∩ linearized visibility`;
/// accepted only if the exact visibility holds and `F` does not decrease.
pub fn su_orientation_step(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    state: &mut SuState,
    controls: &SuControls,
    scale: f64,
) -> Result<bool> {
    let g = orientation_power_gradient(scenario, geom, state) * scale;
    if g == Vector3::zeros() || !g.iter().all(|x| x.is_finite()) {
        return Ok(false);
    }
    let power = state.power();
    let psi0 = state.channels.orientation();
    let psi = psi0.to_vector();
    let half = Halfspace::linearized(geom.visibility(psi0), geom.visibility_gradient(psi0), psi);
    let mut step = controls.step_max;
    while step >= controls.step_min {
        let (cand, _) = dykstra_project(&(psi + g * step), &controls.bounds.limits, &half);
        if cand == psi {
            break;
        }
        let cand_psi = EulerOrientation::from_vector(&cand);
        if geom.visibility(cand_psi) >= 0.0 {
            let trial = ChannelSet::build(
                scenario,
                geom,
                &state.channels.boresights,
                cand_psi,
                &state.channels.phases,
            )?;
            if trial.composite.column(0).norm_squared() >= power {
                state.channels = trial;
                return Ok(true);
            }
        }
        step *= controls.backtrack;
    }
    Ok(false)
}

#[derive(Debug, Clone)]
pub struct SuReport {
    /// `‖h‖²` before the first iteration followed by one entry per iteration.
    pub trace: Vec<f64>,
    pub combiner: CVector,
    pub channel: CVector,
    pub phases: CVector,
    pub state: RotationState,
    pub iterations: usize,
    pub converged: bool,
}

impl SuReport {
    pub fn power(&self) -> f64 {
        *self.trace.last().expect("trace starts with the initial power")
    }

    /// Received SNR `P‖h‖²/σ²` under MRC.
    pub fn snr(&self, scenario: &Scenario) -> f64 {
        scenario.powers[0] * self.power() / scenario.noise
    }
}

/// Alternates BCD phase sweeps, boresight steps on every antenna and an
/// orientation step until the relative change of `‖h‖²` is below `tol`.
///
/// Gradients are divided by the initial `‖h‖²` so that the step controls do
/// not depend on the absolute channel scale.
pub fn su_alternating_optimize(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    init: &AoInit,
    controls: &SuControls,
) -> Result<SuReport> {
    let mut state = SuState::new(scenario, geom, init)?;
    let initial = state.power();
    let scale = if initial > 0.0 { 1.0 / initial } else { 1.0 };
    let mut trace = vec![initial];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < controls.max_iters {
        let prev = *trace.last().unwrap();
        let h_b = state.channels.direct.column(0).into_owned();
        let a = CascadeColumns::from_channels(&state.channels, 0);
        let (v, value) = bcd_optimize(&h_b, &a, &state.channels.phases, controls.bcd_sweeps, controls.bcd_tol);
        if value >= state.power() {
            state.channels.set_phases(&v)?;
        }
        if controls.rotate_bs {
            for m in 0..state.channels.num_antennas() {
                su_boresight_step(scenario, geom, &mut state, m, controls, scale);
            }
        }
        if controls.rotate_irs {
            su_orientation_step(scenario, geom, &mut state, controls, scale)?;
        }
        let power = state.power();
        trace.push(power);
        iterations += 1;
        if (power - prev).abs() / prev.max(f64::MIN_POSITIVE) < controls.tol {
            converged = true;
            break;
        }
    }
    let channel = state.channel();
    let combiner = if channel.norm() > 0.0 {
        mrc_combiner(&channel)?
    } else {
        CVector::zeros(channel.len())
    };
    Ok(SuReport {
        trace,
        combiner,
        channel,
        phases: state.channels.phases.clone(),
        state: state.rotation_state(),
        iterations,
        converged,
    })
}

/// Recovers angles for boresight vectors, keeping `previous` where the vector is unchanged.
pub fn angles_for(
    boresights: &[Vector3<f64>],
    previous: &[BoresightAngles],
    theta_max: f64,
) -> Result<Vec<BoresightAngles>> {
    boresights
        .iter()
        .zip(previous)
        .map(|(f, a)| {
            if *f == boresight_vector(*a) {
                Ok(*a)
            } else {
                angles_from_boresight(f, theta_max)
            }
        })
        .collect()
}
