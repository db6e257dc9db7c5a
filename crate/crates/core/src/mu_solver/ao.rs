//! Alternating optimization of phases, rotations and MMSE combiners.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::channel::{CMatrix, CVector, ChannelSet, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{angles_from_boresight, ArrayGeometry, RotationState};
use crate::manifold::RcgControls;
use crate::mu_solver::combiner::{mmse_combiners, sinr_and_sum_rate};
use crate::mu_solver::fp::fp_rcg_phase_update;
use crate::mu_solver::rotation::{rotation_update, RotationBounds, RotationControls, RotationProblem};

/// Which rotation blocks are optimized; phases and combiners always are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Dual,
    BsOnly,
    IrsOnly,
    Fixed,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Dual, Scheme::BsOnly, Scheme::IrsOnly, Scheme::Fixed];

    pub fn rotates_bs(self) -> bool {
        matches!(self, Scheme::Dual | Scheme::BsOnly)
    }

    pub fn rotates_irs(self) -> bool {
        matches!(self, Scheme::Dual | Scheme::IrsOnly)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Dual => "dual",
            Scheme::BsOnly => "bs-only",
            Scheme::IrsOnly => "irs-only",
            Scheme::Fixed => "fixed",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "dual" => Ok(Scheme::Dual),
            "bs-only" | "bs" => Ok(Scheme::BsOnly),
            "irs-only" | "irs" => Ok(Scheme::IrsOnly),
            "fixed" => Ok(Scheme::Fixed),
            other => Err(Error::InvalidArgument(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoControls {
    pub tol: f64,
    pub max_iters: usize,
    pub fp_iters: usize,
    pub rcg: RcgControls,
    pub rotation: RotationControls,
    pub bounds: RotationBounds,
}

/// Starting point shared by all schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct AoInit {
    pub phases: CVector,
    pub state: RotationState,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// `R_sum` before the first iteration followed by one entry per iteration.
    pub trace: Vec<f64>,
    pub combiners: CMatrix,
    pub phases: CVector,
    pub boresights: Vec<Vector3<f64>>,
    pub state: RotationState,
    pub sinrs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub fp_rejections: usize,
}

impl SolveReport {
    pub fn sum_rate(&self) -> f64 {
        *self.trace.last().expect("trace starts with the initial rate")
    }
}

pub fn ao_optimize(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    init: &AoInit,
    controls: &AoControls,
    scheme: Scheme,
) -> Result<SolveReport> {
    let mut channels = ChannelSet::build(
        scenario,
        geom,
        &init.state.boresight_vectors(),
        init.state.orientation,
        &init.phases,
    )?;
    let mut w = mmse_combiners(&channels.composite, &scenario.powers, scenario.noise);
    let (mut sinrs, mut rate) = sinr_and_sum_rate(&w, &channels.composite, &scenario.powers, scenario.noise);
    let mut trace = vec![rate];
    let mut iterations = 0;
    let mut converged = false;
    let mut fp_rejections = 0;

    while iterations < controls.max_iters {
        let prev = rate;
        let fp = fp_rcg_phase_update(
            &channels,
            &w,
            &scenario.powers,
            scenario.noise,
            &channels.phases,
            controls.fp_iters,
            &controls.rcg,
        )?;
        fp_rejections += fp.rejected;
        channels.set_phases(&fp.v)?;

        if scheme.rotates_bs() || scheme.rotates_irs() {
            let problem = RotationProblem {
                scenario,
                geom,
                bounds: controls.bounds,
                combiners: &w,
            };
            rotation_update(
                &problem,
                &mut channels,
                &controls.rotation,
                scheme.rotates_bs(),
                scheme.rotates_irs(),
            )?;
        }

        let w_new = mmse_combiners(&channels.composite, &scenario.powers, scenario.noise);
        let (s_old, r_old) = sinr_and_sum_rate(&w, &channels.composite, &scenario.powers, scenario.noise);
        let (s_new, r_new) = sinr_and_sum_rate(&w_new, &channels.composite, &scenario.powers, scenario.noise);
        if r_new >= r_old {
            w = w_new;
            sinrs = s_new;
            rate = r_new;
        } else {
            sinrs = s_old;
            rate = r_old;
        }
        trace.push(rate);
        iterations += 1;
        if (rate - prev).abs() / prev.max(f64::MIN_POSITIVE) <= controls.tol {
            converged = true;
            break;
        }
    }

    let state = if scheme == Scheme::Fixed {
        init.state.clone()
    } else {
        RotationState {
            boresights: channels
                .boresights
                .iter()
                .zip(&init.state.boresights)
                .map(|(f, a0)| {
                    if *f == crate::geometry::boresight_vector(*a0) {
                        Ok(*a0)
                    } else {
                        angles_from_boresight(f, controls.bounds.theta_max)
                    }
                })
                .collect::<Result<_>>()?,
            orientation: channels.orientation(),
        }
    };

    Ok(SolveReport {
        trace,
        combiners: w,
        phases: channels.phases.clone(),
        boresights: channels.boresights.clone(),
        state,
        sinrs,
        iterations,
        converged,
        fp_rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_scenario;
    use crate::harness::config::{build_geometry, ScenarioConfig};
    use crate::manifold::random_phases;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn small_controls(cfg: &ScenarioConfig) -> AoControls {
        AoControls {
            tol: cfg.ao_tol,
            max_iters: cfg.ao_max_iters,
            fp_iters: cfg.fp_iters,
            rcg: RcgControls::default(),
            rotation: RotationControls::default(),
            bounds: RotationBounds {
                theta_max: cfg.theta_max(),
                limits: cfg.orientation_limits(),
            },
        }
    }

    fn setup(seed: u64) -> (ScenarioConfig, ArrayGeometry, Scenario, AoInit) {
        let mut cfg = ScenarioConfig::default();
        cfg.irs_side = 7;
        let geom = build_geometry(&cfg).unwrap();
        let sc = if seed % 2 == 0 {
            sample_scenario(&cfg, seed).unwrap()
        } else {
            crate::testutil::front_users(&cfg, 4, seed)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = AoInit {
            phases: random_phases(49, &mut rng),
            state: RotationState::reference(16),
        };
        (cfg, geom, sc, init)
    }

    #[test]
    fn scheme_parse_roundtrip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("both".parse::<Scheme>().is_err());
    }

    #[test]
    fn fixed_scheme_keeps_rotations() {
        let (cfg, geom, sc, init) = setup(1);
        let rep = ao_optimize(&sc, &geom, &init, &small_controls(&cfg), Scheme::Fixed).unwrap();
        assert_eq!(rep.state, init.state);
        assert_eq!(rep.boresights, init.state.boresight_vectors());
        assert!(rep.trace.windows(2).all(|p| p[1] >= p[0]));
    }

    #[test]
    fn traces_monotone_and_feasible() {
        for seed in 0..4 {
            let (cfg, geom, sc, init) = setup(seed);
            let c = small_controls(&cfg);
            for scheme in Scheme::ALL {
                let rep = ao_optimize(&sc, &geom, &init, &c, scheme).unwrap();
                assert!(rep.trace.windows(2).all(|p| p[1] >= p[0]), "{scheme}: {:?}", rep.trace);
                assert!(rep.iterations <= cfg.ao_max_iters);
                assert!(rep.state.within_limits(c.bounds.theta_max, &c.bounds.limits));
                assert!(geom.visibility(rep.state.orientation) >= 0.0);
            }
        }
    }
}
