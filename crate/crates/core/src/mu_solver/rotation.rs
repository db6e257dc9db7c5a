//! Rotation update for fixed combiners and phases: cap-projected boresight
//! steps followed by a safeguarded Barzilai–Borwein orientation step.

use nalgebra::Vector3;

use crate::channel::{CMatrix, ChannelSet, Scenario};
use crate::error::Result;
use crate::geometry::{ArrayGeometry, EulerOrientation, OrientationLimits};
use crate::mu_solver::combiner::sum_rate;
use crate::mu_solver::gradient::{sum_rate_gradient, GradientTarget};
use crate::mu_solver::projection::{cap_project, dykstra_project, Halfspace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationControls {
    pub tol: f64,
    pub floor: f64,
    pub max_iters: usize,
    pub step_max: f64,
    pub step_min: f64,
    pub backtrack: f64,
    pub bb_init: f64,
    pub bb_min: f64,
    pub bb_max: f64,
}

impl Default for RotationControls {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            floor: 1e-12,
            max_iters: 10,
            step_max: 1.0,
            step_min: 1e-6,
            backtrack: 0.5,
            bb_init: 1e-2,
            bb_min: 1e-8,
            bb_max: 1e2,
        }
    }
}

/// Cap half-angle and Euler-angle box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationBounds {
    pub theta_max: f64,
    pub limits: OrientationLimits,
}

/// Read-only problem data shared by the rotation updates.
#[derive(Debug, Clone, Copy)]
pub struct RotationProblem<'a> {
    pub scenario: &'a Scenario,
    pub geom: &'a ArrayGeometry,
    pub bounds: RotationBounds,
    pub combiners: &'a CMatrix,
}

impl RotationProblem<'_> {
    pub fn rate(&self, channels: &ChannelSet) -> f64 {
        sum_rate(
            self.combiners,
            &channels.composite,
            &self.scenario.powers,
            self.scenario.noise,
        )
    }
}

/// One pass `m = 1..M` of projected-gradient boresight steps with backtracking.
///
/// Returns the sum rate after the sweep.
pub fn boresight_update_sweep(
    problem: &RotationProblem,
    channels: &mut ChannelSet,
    controls: &RotationControls,
) -> Result<f64> {
    let mut rate = problem.rate(channels);
    for m in 0..channels.num_antennas() {
        let g = sum_rate_gradient(
            problem.scenario,
            problem.geom,
            channels,
            problem.combiners,
            GradientTarget::Boresight(m),
        );
        if g == Vector3::zeros() || !g.iter().all(|x| x.is_finite()) {
            continue;
        }
        let f_old = channels.boresights[m];
        let mut step = controls.step_max;
        let mut accepted = false;
        while step >= controls.step_min {
            let cand = cap_project(&(f_old + g * step), problem.bounds.theta_max)?;
            if cand != f_old {
                channels.set_boresight(problem.scenario, problem.geom, m, cand);
                let r = problem.rate(channels);
                if r >= rate {
                    rate = r;
                    accepted = true;
                    break;
                }
            }
            step *= controls.backtrack;
        }
        if !accepted && channels.boresights[m] != f_old {
            channels.set_boresight(problem.scenario, problem.geom, m, f_old);
        }
    }
    Ok(rate)
}

/// Previous orientation and gradient for the spectral step.
#[derive(Debug, Clone, Default)]
pub struct BbMemory {
    pub previous: Option<(Vector3<f64>, Vector3<f64>)>,
    pub count: usize,
}

impl BbMemory {
    /// Alternating BB1/BB2 step in the minimization convention, clamped to `[τ_min, τ_max]`.
    pub fn step(&self, psi: &Vector3<f64>, grad: &Vector3<f64>, controls: &RotationControls) -> f64 {
        let Some((psi_prev, grad_prev)) = self.previous else {
            return controls.bb_init;
        };
        let s = psi - psi_prev;
        let y = -(grad - grad_prev);
        let sy = s.dot(&y);
        let tau = if sy <= 0.0 {
            controls.bb_max
        } else if self.count % 2 == 1 {
            s.dot(&s) / sy
        } else {
            sy / y.dot(&y)
        };
        if tau.is_finite() {
            tau.clamp(controls.bb_min, controls.bb_max)
        } else {
            controls.bb_max
        }
    }

    fn record(&mut self, psi: Vector3<f64>, grad: Vector3<f64>) {
        self.previous = Some((psi, grad));
        self.count += 1;
    }
}

/// Orientation step onto `box ∩ linearized visibility`, accepted only if the
/// exact visibility holds and the sum rate does not decrease.
pub fn orientation_bb_update(
    problem: &RotationProblem,
    channels: &mut ChannelSet,
    memory: &mut BbMemory,
    controls: &RotationControls,
) -> Result<f64> {
    let rate = problem.rate(channels);
    let psi0 = channels.orientation();
    let psi = psi0.to_vector();
    let g = sum_rate_gradient(
        problem.scenario,
        problem.geom,
        channels,
        problem.combiners,
        GradientTarget::Orientation,
    );
    if g == Vector3::zeros() || !g.iter().all(|x| x.is_finite()) {
        return Ok(rate);
    }
    let mut tau = memory.step(&psi, &g, controls);
    memory.record(psi, g);
    let half = Halfspace::linearized(
        problem.geom.visibility(psi0),
        problem.geom.visibility_gradient(psi0),
        psi,
    );
    while tau >= controls.bb_min {
        let (cand, _) = dykstra_project(&(psi + g * tau), &problem.bounds.limits, &half);
        let cand_psi = EulerOrientation::from_vector(&cand);
        if cand == psi {
            break;
        }
        if problem.geom.visibility(cand_psi) >= 0.0 {
            if let Ok(trial) = ChannelSet::build(
                problem.scenario,
                problem.geom,
                &channels.boresights,
                cand_psi,
                &channels.phases,
            ) {
                let r = problem.rate(&trial);
                if r >= rate {
                    *channels = trial;
                    return Ok(r);
                }
            }
        }
        tau *= 0.5;
    }
    Ok(rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationOutcome {
    pub rate: f64,
    pub iterations: usize,
}

/// Repeats {boresight sweep, orientation step} until the relative change is
/// at most `tol` or `max_iters` rounds have run.
pub fn rotation_update(
    problem: &RotationProblem,
    channels: &mut ChannelSet,
    controls: &RotationControls,
    rotate_bs: bool,
    rotate_irs: bool,
) -> Result<RotationOutcome> {
    let mut rate = problem.rate(channels);
    let mut memory = BbMemory::default();
    let mut iterations = 0;
    if !rotate_bs && !rotate_irs {
        return Ok(RotationOutcome { rate, iterations });
    }
    while iterations < controls.max_iters {
        let prev = rate;
        if rotate_bs {
            rate = boresight_update_sweep(problem, channels, controls)?;
        }
        if rotate_irs {
            rate = orientation_bb_update(problem, channels, &mut memory, controls)?;
        }
        iterations += 1;
        if (rate - prev).abs() / prev.max(controls.floor) <= controls.tol {
            break;
        }
    }
    Ok(RotationOutcome { rate, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_scenario, CVector};
    use crate::geometry::BORESIGHT_REF;
    use crate::harness::config::{build_geometry, ScenarioConfig};
    use crate::manifold::random_phases;
    use crate::mu_solver::combiner::mmse_combiners;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        geom: ArrayGeometry,
        sc: Scenario,
        cs: ChannelSet,
        w: CMatrix,
        bounds: RotationBounds,
    }

    fn fixture(seed: u64) -> Fixture {
        let mut cfg = ScenarioConfig::default();
        cfg.irs_side = 7;
        let geom = build_geometry(&cfg).unwrap();
        let sc = if seed % 2 == 0 {
            sample_scenario(&cfg, seed).unwrap()
        } else {
            crate::testutil::front_users(&cfg, 4, seed)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_phases(49, &mut rng);
        let psi = EulerOrientation::new(
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
        );
        let cs = ChannelSet::build(&sc, &geom, &vec![BORESIGHT_REF; 16], psi, &v).unwrap();
        let w = mmse_combiners(&cs.composite, &sc.powers, sc.noise);
        Fixture {
            geom,
            sc,
            cs,
            w,
            bounds: RotationBounds {
                theta_max: cfg.theta_max(),
                limits: cfg.orientation_limits(),
            },
        }
    }

    fn problem(fx: &Fixture) -> RotationProblem<'_> {
        RotationProblem {
            scenario: &fx.sc,
            geom: &fx.geom,
            bounds: fx.bounds,
            combiners: &fx.w,
        }
    }

    #[test]
    fn sweep_is_monotone_and_stays_in_cap() {
        for seed in 0..50 {
            let fx = fixture(seed);
            let p = problem(&fx);
            let mut cs = fx.cs.clone();
            let before = p.rate(&cs);
            let after = boresight_update_sweep(&p, &mut cs, &RotationControls::default()).unwrap();
            assert!(after >= before);
            assert_eq!(after, p.rate(&cs));
            for f in &cs.boresights {
                assert!((f.norm() - 1.0).abs() < 1e-10);
                assert!(f.dot(&BORESIGHT_REF) >= fx.bounds.theta_max.cos() - 1e-10);
            }
        }
    }

    #[test]
    fn zero_gradient_leaves_boresights() {
        let mut fx = fixture(3);
        for u in &mut fx.sc.users {
            u.reflected.clear();
            u.direct.clear();
        }
        let cs = ChannelSet::build(
            &fx.sc,
            &fx.geom,
            &vec![BORESIGHT_REF; 16],
            EulerOrientation::reference(),
            &CVector::from_element(49, num_complex::Complex64::new(1.0, 0.0)),
        )
        .unwrap();
        let w = CMatrix::from_element(16, 4, num_complex::Complex64::new(0.25, 0.0));
        let p = RotationProblem {
            scenario: &fx.sc,
            geom: &fx.geom,
            bounds: fx.bounds,
            combiners: &w,
        };
        let mut after = cs.clone();
        boresight_update_sweep(&p, &mut after, &RotationControls::default()).unwrap();
        assert_eq!(after.boresights, cs.boresights);
        let mut mem = BbMemory::default();
        orientation_bb_update(&p, &mut after, &mut mem, &RotationControls::default()).unwrap();
        assert_eq!(after.orientation(), cs.orientation());
    }

    #[test]
    fn first_bb_step_is_initial_value() {
        let c = RotationControls::default();
        let mem = BbMemory::default();
        assert_eq!(mem.step(&Vector3::zeros(), &Vector3::x(), &c), c.bb_init);
        let mut mem = BbMemory::default();
        mem.record(Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0));
        // Concave model: gradient falls as ψ grows, s·y > 0.
        let tau = mem.step(&Vector3::new(0.1, 0.0, 0.0), &Vector3::new(0.5, 0.0, 0.0), &c);
        assert!((tau - 0.2).abs() < 1e-12);
        let tau = mem.step(&Vector3::new(0.1, 0.0, 0.0), &Vector3::new(2.0, 0.0, 0.0), &c);
        assert_eq!(tau, c.bb_max);
    }

    #[test]
    fn orientation_update_is_monotone_and_visible() {
        for seed in 0..50 {
            let fx = fixture(seed);
            let p = problem(&fx);
            let mut cs = fx.cs.clone();
            let before = p.rate(&cs);
            let mut mem = BbMemory::default();
            let after = orientation_bb_update(&p, &mut cs, &mut mem, &RotationControls::default()).unwrap();
            assert!(after >= before);
            assert!(fx.geom.visibility(cs.orientation()) >= 0.0);
            assert!(fx.bounds.limits.contains(&cs.orientation()));
        }
    }

    #[test]
    fn rotation_update_budget_and_feasibility() {
        let fx = fixture(11);
        let p = problem(&fx);
        let mut cs = fx.cs.clone();
        let before = p.rate(&cs);
        let one = RotationControls {
            max_iters: 1,
            ..Default::default()
        };
        let out = rotation_update(&p, &mut cs, &one, true, true).unwrap();
        assert_eq!(out.iterations, 1);
        let out = rotation_update(&p, &mut cs, &RotationControls::default(), true, true).unwrap();
        assert!(out.rate >= before);
        assert!(out.iterations <= 10);
        assert!(fx.geom.visibility(cs.orientation()) >= 0.0);
        assert!(fx.bounds.limits.contains(&cs.orientation()));
        for f in &cs.boresights {
            assert!(f.dot(&BORESIGHT_REF) >= fx.bounds.theta_max.cos() - 1e-10);
        }
    }
}
