//! Shared fixtures for unit tests.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{GainPattern, Scenario};
use crate::harness::config::ScenarioConfig;

/// LoS scenario whose users sit in front of both the BS and the reference IRS plane.
pub fn front_users(cfg: &ScenarioConfig, users: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<Vector3<f64>> = (0..users)
        .map(|_| {
            Vector3::new(
                rng.random_range(-40.0..-25.0),
                rng.random_range(2.0..8.0),
                cfg.user_height,
            )
        })
        .collect();
    los_scenario(cfg, &positions, true)
}

/// Reflected-only LoS scenario with users close to the reference IRS normal.
pub fn irs_facing_users(cfg: &ScenarioConfig, users: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<Vector3<f64>> = (0..users)
        .map(|_| {
            Vector3::new(
                rng.random_range(-25.0..-5.0),
                rng.random_range(-20.0..-5.0),
                cfg.user_height,
            )
        })
        .collect();
    los_scenario(cfg, &positions, false)
}

fn los_scenario(cfg: &ScenarioConfig, positions: &[Vector3<f64>], with_direct: bool) -> Scenario {
    let mut sc = Scenario::line_of_sight(
        positions,
        Vector3::from(cfg.bs_center),
        Vector3::from(cfg.irs_center),
        cfg.wavelength(),
        with_direct,
        cfg.tx_power_watts(),
        cfg.noise_watts(),
        GainPattern::new(cfg.bs_exponent).unwrap(),
        GainPattern::new(cfg.irs_exponent).unwrap(),
    );
    sc.direct_attenuation_db = cfg.direct_attenuation_db;
    sc
}
