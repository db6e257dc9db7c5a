//! Sampled user and scatterer realizations.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::gain::GainPattern;
use crate::error::Result;
use crate::harness::config::ScenarioConfig;
use crate::rng::{stream, Stream};

/// Redraw budget for a scatterer falling behind its receiving aperture.
pub const SCATTERER_MAX_DRAWS: usize = 64;

/// One propagation path from a user to a receiving aperture center.
#[derive(Debug, Clone, PartialEq)]
pub struct PathComponent {
    /// `None` for the line-of-sight path.
    pub scatterer: Option<Vector3<f64>>,
    /// Total propagation distance in meters.
    pub distance: f64,
    /// Unit propagation direction at the receiver.
    pub direction: Vector3<f64>,
    pub gain: Complex64,
    /// Random NLoS phase, zero for LoS.
    pub phase: f64,
}

impl PathComponent {
    pub fn los(source: Vector3<f64>, receiver: Vector3<f64>, wavelength: f64) -> Self {
        let diff = receiver - source;
        let d = diff.norm();
        Self {
            scatterer: None,
            distance: d,
            direction: diff / d,
            gain: free_space(wavelength, d, 0.0),
            phase: 0.0,
        }
    }

    pub fn nlos(
        source: Vector3<f64>,
        scatterer: Vector3<f64>,
        receiver: Vector3<f64>,
        wavelength: f64,
        amplitude: f64,
        phase: f64,
    ) -> Self {
        let last = receiver - scatterer;
        let last_len = last.norm();
        let d = (scatterer - source).norm() + last_len;
        Self {
            scatterer: Some(scatterer),
            distance: d,
            direction: last / last_len,
            gain: free_space(wavelength, d, phase) * amplitude,
            phase,
        }
    }

    pub fn is_los(&self) -> bool {
        self.scatterer.is_none()
    }
}

/// `λ/(4πd) e^{−j k d + jφ}`.
fn free_space(wavelength: f64, d: f64, phase: f64) -> Complex64 {
    let k = TAU / wavelength;
    Complex64::from_polar(wavelength / (4.0 * PI * d), -k * d + phase)
}

/// Paths from one user to the BS and to the IRS.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLinks {
    pub position: Vector3<f64>,
    /// Empty when the direct link is disabled.
    pub direct: Vec<PathComponent>,
    pub reflected: Vec<PathComponent>,
}

/// One fully specified realization; channels are deterministic functions of it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: Vec<UserLinks>,
    pub direct_attenuation_db: f64,
    /// Per-user transmit powers in watts.
    pub powers: Vec<f64>,
    /// Noise power in watts.
    pub noise: f64,
    pub bs_pattern: GainPattern,
    pub irs_pattern: GainPattern,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Amplitude factor `10^{−A/20}` applied to every direct path.
    pub fn direct_amplitude(&self) -> f64 {
        10f64.powf(-self.direct_attenuation_db / 20.0)
    }

    /// Copy with the direct link and all NLoS components removed.
    pub fn cascaded_los(&self) -> Self {
        let mut out = self.clone();
        for u in &mut out.users {
            u.direct.clear();
            u.reflected.retain(PathComponent::is_los);
        }
        out
    }

    /// Copy keeping only the listed users.
    pub fn select_users(&self, keep: &[usize]) -> Self {
        let mut out = self.clone();
        out.users = keep.iter().map(|&k| self.users[k].clone()).collect();
        out.powers = keep.iter().map(|&k| self.powers[k]).collect();
        out
    }

    /// Builds LoS-only links for users at the given positions.
    pub fn line_of_sight(
        positions: &[Vector3<f64>],
        bs_center: Vector3<f64>,
        irs_center: Vector3<f64>,
        wavelength: f64,
        with_direct: bool,
        power: f64,
        noise: f64,
        bs_pattern: GainPattern,
        irs_pattern: GainPattern,
    ) -> Self {
        let users = positions
            .iter()
            .map(|&u| UserLinks {
                position: u,
                direct: if with_direct {
                    vec![PathComponent::los(u, bs_center, wavelength)]
                } else {
                    Vec::new()
                },
                reflected: vec![PathComponent::los(u, irs_center, wavelength)],
            })
            .collect();
        Self {
            users,
            direct_attenuation_db: 0.0,
            powers: vec![power; positions.len()],
            noise,
            bs_pattern,
            irs_pattern,
        }
    }
}

fn sample_scatterer(
    rng: &mut ChaCha8Rng,
    config: &ScenarioConfig,
    user: &Vector3<f64>,
    receiver: &Vector3<f64>,
    front: &Vector3<f64>,
) -> Vector3<f64> {
    let mut last = *user;
    for _ in 0..SCATTERER_MAX_DRAWS {
        let r = config.scatterer_radius * rng.random::<f64>().sqrt();
        let t = rng.random_range(0.0..TAU);
        let h = if config.scatterer_height_max > config.scatterer_height_min {
            rng.random_range(config.scatterer_height_min..config.scatterer_height_max)
        } else {
            config.scatterer_height_min
        };
        last = Vector3::new(user[0] + r * t.cos(), user[1] + r * t.sin(), h);
        if front.dot(&(last - receiver)) > 0.0 {
            return last;
        }
    }
    last
}

/// Draws user positions, scatterers and NLoS phases for one seed.
///
/// Users sit at horizontal distance `[d_min, d_max]` from the BS and at an
/// azimuth measured from the BS array normal (+y) toward +x.
pub fn sample_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let lambda = config.wavelength();
    let b0 = Vector3::from(config.bs_center);
    let r0 = Vector3::from(config.irs_center);
    let irs_front = (b0 - r0).normalize();
    let bs_front = Vector3::y();
    let mut rng = stream(seed, Stream::Scenario);
    let az_max = config.user_azimuth_max_deg.to_radians();

    let mut users = Vec::with_capacity(config.users);
    for _ in 0..config.users {
        let dist = if config.user_distance_max > config.user_distance_min {
            rng.random_range(config.user_distance_min..config.user_distance_max)
        } else {
            config.user_distance_min
        };
        let az = if az_max > 0.0 {
            rng.random_range(-az_max..=az_max)
        } else {
            0.0
        };
        let pos = Vector3::new(b0[0] + dist * az.sin(), b0[1] + dist * az.cos(), config.user_height);

        let mut direct = vec![PathComponent::los(pos, b0, lambda)];
        for _ in 1..config.direct_paths {
            let o = sample_scatterer(&mut rng, config, &pos, &b0, &bs_front);
            let phase = rng.random_range(0.0..TAU);
            direct.push(PathComponent::nlos(pos, o, b0, lambda, config.nlos_amplitude, phase));
        }
        let mut reflected = vec![PathComponent::los(pos, r0, lambda)];
        for _ in 1..config.irs_paths {
            let o = sample_scatterer(&mut rng, config, &pos, &r0, &irs_front);
            let phase = rng.random_range(0.0..TAU);
            reflected.push(PathComponent::nlos(pos, o, r0, lambda, config.nlos_amplitude, phase));
        }
        users.push(UserLinks {
            position: pos,
            direct,
            reflected,
        });
    }

    let scenario = Scenario {
        users,
        direct_attenuation_db: config.direct_attenuation_db,
        powers: vec![config.tx_power_watts(); config.users],
        noise: config.noise_watts(),
        bs_pattern: GainPattern::new(config.bs_exponent)?,
        irs_pattern: GainPattern::new(config.irs_exponent)?,
    };
    Ok(if config.cascaded_los_only {
        scenario.cascaded_los()
    } else {
        scenario
    })
}
