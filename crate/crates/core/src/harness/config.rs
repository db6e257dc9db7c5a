//! Flat key–value scenario configuration.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, GeometryParams, OrientationLimits};

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Every physical and algorithmic parameter of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub carrier_hz: f64,
    pub bs_center: [f64; 3],
    pub irs_center: [f64; 3],
    /// BS grid size along x.
    pub bs_cols: usize,
    /// BS grid size along z.
    pub bs_rows: usize,
    pub irs_side: usize,
    pub bs_spacing_wavelengths: f64,
    pub irs_spacing_wavelengths: f64,
    pub users: usize,
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub direct_paths: usize,
    pub irs_paths: usize,
    pub nlos_amplitude: f64,
    pub bs_exponent: f64,
    pub irs_exponent: f64,
    pub theta_max_deg: f64,
    pub alpha_max_deg: f64,
    pub beta_max_deg: f64,
    pub phi_max_deg: f64,
    pub direct_attenuation_db: f64,
    /// Drop the direct link and every NLoS component.
    pub cascaded_los_only: bool,
    pub user_distance_min: f64,
    pub user_distance_max: f64,
    pub user_height: f64,
    pub user_azimuth_max_deg: f64,
    pub scatterer_radius: f64,
    pub scatterer_height_min: f64,
    pub scatterer_height_max: f64,
    pub ao_tol: f64,
    pub ao_max_iters: usize,
    pub rot_tol: f64,
    pub rot_floor: f64,
    pub rot_max_iters: usize,
    pub fp_iters: usize,
    pub rcg_max_iters: usize,
    pub step_max: f64,
    pub step_min: f64,
    pub backtrack: f64,
    pub bb_init: f64,
    pub bb_min: f64,
    pub bb_max: f64,
    /// Continue each scheme from the solutions of the schemes it contains.
    pub nested_warm_start: bool,
    pub seed: u64,
    pub trials: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 6.0e9,
            bs_center: [0.0, 0.0, 10.0],
            irs_center: [2.0, 4.0, 14.0],
            bs_cols: 4,
            bs_rows: 4,
            irs_side: 21,
            bs_spacing_wavelengths: 0.5,
            irs_spacing_wavelengths: 0.5,
            users: 4,
            tx_power_dbm: 20.0,
            noise_dbm: -80.0,
            direct_paths: 4,
            irs_paths: 4,
            nlos_amplitude: 0.3,
            bs_exponent: 6.0,
            irs_exponent: 5.0,
            theta_max_deg: 60.0,
            alpha_max_deg: 60.0,
            beta_max_deg: 60.0,
            phi_max_deg: 60.0,
            direct_attenuation_db: 25.0,
            cascaded_los_only: false,
            user_distance_min: 30.0,
            user_distance_max: 100.0,
            user_height: 1.5,
            user_azimuth_max_deg: 60.0,
            scatterer_radius: 20.0,
            scatterer_height_min: 1.0,
            scatterer_height_max: 20.0,
            ao_tol: 1e-3,
            ao_max_iters: 30,
            rot_tol: 1e-4,
            rot_floor: 1e-12,
            rot_max_iters: 10,
            fp_iters: 10,
            rcg_max_iters: 50,
            step_max: 1.0,
            step_min: 1e-6,
            backtrack: 0.5,
            bb_init: 1e-2,
            bb_min: 1e-8,
            bb_max: 1e2,
            nested_warm_start: true,
            seed: 1,
            trials: 50,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    /// Parses a flat TOML document; missing keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e.message().split('`').nth(1).unwrap_or("<document>").to_string();
            invalid(&field, e.message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets one field from its textual value, as a CLI override would.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table: toml::Table = toml::from_str(&self.to_toml_string()).expect("round trip");
        let current = table.get(key).ok_or_else(|| invalid(key, "unknown key"))?.clone();
        let parsed: toml::Value = match current {
            toml::Value::String(_) => toml::Value::String(value.to_string()),
            _ => {
                let doc: toml::Table = toml::from_str(&format!("v = {value}"))
                    .map_err(|e| invalid(key, e.message().trim().to_string()))?;
                doc["v"].clone()
            }
        };
        table.insert(key.to_string(), parsed);
        let updated: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| invalid(key, e.message().trim().to_string()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn num_antennas(&self) -> usize {
        self.bs_cols * self.bs_rows
    }

    pub fn num_elements(&self) -> usize {
        self.irs_side * self.irs_side
    }

    pub fn tx_power_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max_deg.to_radians()
    }

    pub fn orientation_limits(&self) -> OrientationLimits {
        OrientationLimits {
            alpha_max: self.alpha_max_deg.to_radians(),
            beta_max: self.beta_max_deg.to_radians(),
            phi_max: self.phi_max_deg.to_radians(),
        }
    }

    pub fn geometry_params(&self) -> GeometryParams {
        let lambda = self.wavelength();
        GeometryParams {
            wavelength: lambda,
            bs_center: Vector3::from(self.bs_center),
            bs_cols: self.bs_cols,
            bs_rows: self.bs_rows,
            bs_spacing: self.bs_spacing_wavelengths * lambda,
            irs_center: Vector3::from(self.irs_center),
            irs_side: self.irs_side,
            irs_spacing: self.irs_spacing_wavelengths * lambda,
        }
    }

    /// Moves the IRS along the current BS→IRS ray so that `ξ` takes the given value.
    pub fn with_xi(&self, xi: f64) -> Result<Self> {
        if !(xi > 0.0) {
            return Err(invalid("xi", "must be positive"));
        }
        let geom = build_geometry(self)?;
        let dist = geom.irs_diagonal() / xi;
        let dir = (geom.irs_center - geom.bs_center).normalize();
        let r0 = geom.bs_center + dir * dist;
        let mut out = self.clone();
        out.irs_center = [r0[0], r0[1], r0[2]];
        Ok(out)
    }

    /// Sets a square BS array with `m` antennas.
    pub fn with_antennas(&self, m: usize) -> Result<Self> {
        let side = (m as f64).sqrt().round() as usize;
        if side == 0 || side * side != m {
            return Err(invalid("bs_cols", format!("{m} is not a perfect square")));
        }
        let mut out = self.clone();
        out.bs_cols = side;
        out.bs_rows = side;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be positive and finite, got {v}")))
            }
        };
        let angle = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v < 90.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must lie in (0, 90) degrees, got {v}")))
            }
        };
        let count = |name: &str, v: usize| -> Result<()> {
            if v > 0 {
                Ok(())
            } else {
                Err(invalid(name, "must be at least 1"))
            }
        };
        positive("carrier_hz", self.carrier_hz)?;
        for (name, c) in [("bs_center", self.bs_center), ("irs_center", self.irs_center)] {
            if c.iter().any(|x| !x.is_finite()) {
                return Err(invalid(name, "coordinates must be finite"));
            }
        }
        if self.bs_center == self.irs_center {
            return Err(invalid("irs_center", "coincides with bs_center"));
        }
        count("bs_cols", self.bs_cols)?;
        count("bs_rows", self.bs_rows)?;
        count("irs_side", self.irs_side)?;
        count("users", self.users)?;
        count("direct_paths", self.direct_paths)?;
        count("irs_paths", self.irs_paths)?;
        positive("bs_spacing_wavelengths", self.bs_spacing_wavelengths)?;
        positive("irs_spacing_wavelengths", self.irs_spacing_wavelengths)?;
        if !(-60.0..=60.0).contains(&self.tx_power_dbm) {
            return Err(invalid(
                "tx_power_dbm",
                format!("must lie in [-60, 60] dBm, got {}", self.tx_power_dbm),
            ));
        }
        if !(-200.0..=0.0).contains(&self.noise_dbm) {
            return Err(invalid(
                "noise_dbm",
                format!("must lie in [-200, 0] dBm, got {}", self.noise_dbm),
            ));
        }
        if !(self.nlos_amplitude > 0.0 && self.nlos_amplitude < 1.0) {
            return Err(invalid("nlos_amplitude", "must lie in (0, 1)"));
        }
        if !(self.bs_exponent >= 0.5 && self.bs_exponent.is_finite()) {
            return Err(invalid("bs_exponent", "must be at least 0.5"));
        }
        if !(self.irs_exponent >= 0.5 && self.irs_exponent.is_finite()) {
            return Err(invalid("irs_exponent", "must be at least 0.5"));
        }
        angle("theta_max_deg", self.theta_max_deg)?;
        angle("alpha_max_deg", self.alpha_max_deg)?;
        angle("beta_max_deg", self.beta_max_deg)?;
        angle("phi_max_deg", self.phi_max_deg)?;
        if !(self.direct_attenuation_db >= 0.0 && self.direct_attenuation_db.is_finite()) {
            return Err(invalid("direct_attenuation_db", "must be non-negative"));
        }
        positive("user_distance_min", self.user_distance_min)?;
        if !(self.user_distance_max >= self.user_distance_min && self.user_distance_max.is_finite()) {
            return Err(invalid("user_distance_max", "must be at least user_distance_min"));
        }
        if !self.user_height.is_finite() {
            return Err(invalid("user_height", "must be finite"));
        }
        if !(self.user_azimuth_max_deg >= 0.0 && self.user_azimuth_max_deg <= 180.0) {
            return Err(invalid("user_azimuth_max_deg", "must lie in [0, 180]"));
        }
        positive("scatterer_radius", self.scatterer_radius)?;
        if !(self.scatterer_height_max >= self.scatterer_height_min
            && self.scatterer_height_min.is_finite()
            && self.scatterer_height_max.is_finite())
        {
            return Err(invalid("scatterer_height_max", "must be at least scatterer_height_min"));
        }
        positive("ao_tol", self.ao_tol)?;
        positive("rot_tol", self.rot_tol)?;
        positive("rot_floor", self.rot_floor)?;
        positive("step_max", self.step_max)?;
        positive("step_min", self.step_min)?;
        if !(self.step_min <= self.step_max) {
            return Err(invalid("step_min", "must not exceed step_max"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(invalid("backtrack", "must lie in (0, 1)"));
        }
        positive("bb_init", self.bb_init)?;
        positive("bb_min", self.bb_min)?;
        positive("bb_max", self.bb_max)?;
        if !(self.bb_min <= self.bb_init && self.bb_init <= self.bb_max) {
            return Err(invalid("bb_init", "must lie in [bb_min, bb_max]"));
        }
        count("trials", self.trials)?;
        Ok(())
    }
}

/// Reads a config file, or returns defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })?;
            ScenarioConfig::from_toml_str(&text)
        }
    }
}

/// Array layout implied by a config.
pub fn build_geometry(config: &ScenarioConfig) -> Result<ArrayGeometry> {
    ArrayGeometry::build(&config.geometry_params())
}
