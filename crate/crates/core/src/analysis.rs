//! Reflected-channel power functionals, rotation gains and IRS–BS alignment statistics.

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{
    irs_bs_channel, irs_bs_channel_farfield, user_irs_channel, CMatrix, CVector, GainPattern, Scenario,
};
use crate::error::{Error, Result};
use crate::geometry::{
    angles_from_boresight, irs_element_positions, irs_normal, ArrayGeometry, BoresightAngles, EulerOrientation,
    OrientationLimits, RotationState,
};
use crate::harness::config::{build_geometry, ScenarioConfig};
use crate::harness::parallel::Execution;
use crate::manifold::random_phases;
use crate::mu_solver::projection::{dykstra_project, Halfspace};
use crate::mu_solver::{AoInit, RotationBounds};
use crate::rng::{stream, trial_seed, Stream};
use crate::su_solver::{bcd_optimize, su_alternating_optimize, CascadeColumns, SuControls};

/// IRS–BS channel model used to evaluate the reflected power.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldModel {
    FarField,
    NearField,
}

impl FieldModel {
    pub fn name(self) -> &'static str {
        match self {
            FieldModel::FarField => "ff",
            FieldModel::NearField => "nf",
        }
    }
}

/// `J = N² p̄ β` for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectedPowerBreakdown {
    pub model: FieldModel,
    pub num_elements: usize,
    /// Optimized reflected-channel power `max_v ‖A v‖²` (a lower bound for the near-field model).
    pub j: f64,
    /// Average column power `‖A‖_F² / N`.
    pub p_bar: f64,
    /// Combining efficiency `J / (N² p̄)`; NaN when the cascade is zero.
    pub beta: f64,
    /// Phases attaining `j`.
    pub phases: CVector,
}

impl ReflectedPowerBreakdown {
    /// `N² p̄`, the largest value `‖A v‖²` can take.
    pub fn upper_bound(&self) -> f64 {
        let n = self.num_elements as f64;
        n * n * self.p_bar
    }

    /// `N p̄`, the expected `‖A v‖²` under uniformly random phases.
    pub fn lower_bound(&self) -> f64 {
        self.num_elements as f64 * self.p_bar
    }

    pub fn is_zero(&self) -> bool {
        self.p_bar == 0.0
    }

    fn new(model: FieldModel, num_elements: usize, j: f64, p_bar: f64, phases: CVector) -> Self {
        let n = num_elements as f64;
        let beta = if p_bar > 0.0 { j / (n * n * p_bar) } else { f64::NAN };
        Self {
            model,
            num_elements,
            j,
            p_bar,
            beta,
            phases,
        }
    }
}

/// `A = H_RB diag(h_{R,k})` under the chosen IRS–BS model.
pub fn cascade_matrix(
    model: FieldModel,
    scenario: &Scenario,
    geom: &ArrayGeometry,
    state: &RotationState,
    k: usize,
) -> Result<CMatrix> {
    let boresights = state.boresight_vectors();
    let h_rb = match model {
        FieldModel::FarField => irs_bs_channel_farfield(scenario, geom, &boresights, state.orientation)?.matrix(),
        FieldModel::NearField => irs_bs_channel(scenario, geom, &boresights, state.orientation)?,
    };
    let h_r = user_irs_channel(scenario, geom, state.orientation);
    let mut a = h_rb;
    for (n, mut col) in a.column_iter_mut().enumerate() {
        col *= h_r[(n, k)];
    }
    Ok(a)
}

/// Far-field breakdown in closed form: `J = |c|² ‖u_B‖² (Σ|s_n|)²` with `s = u_R ⊙ h_R`.
pub fn reflected_power_ff(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    state: &RotationState,
    k: usize,
) -> Result<ReflectedPowerBreakdown> {
    let ff = irs_bs_channel_farfield(scenario, geom, &state.boresight_vectors(), state.orientation)?;
    let h_r = user_irs_channel(scenario, geom, state.orientation);
    let s: Vec<Complex64> = ff.u_r.iter().zip(h_r.column(k).iter()).map(|(u, h)| u * h).collect();
    let scale = ff.c_rb.norm_sqr() * ff.u_b.norm_squared();
    let sum_abs: f64 = s.iter().map(|x| x.norm()).sum();
    let sum_sq: f64 = s.iter().map(|x| x.norm_sqr()).sum();
    let n = s.len();
    let phases = CVector::from_iterator(
        n,
        s.iter().map(|x| {
            if x.norm() > 0.0 {
                x.conj() / x.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        }),
    );
    Ok(ReflectedPowerBreakdown::new(
        FieldModel::FarField,
        n,
        scale * sum_abs * sum_abs,
        scale * sum_sq / n as f64,
        phases,
    ))
}

/// Near-field breakdown; `J` is the best BCD result over the given starts plus
/// `restarts` random ones drawn from `rng`.
pub fn reflected_power_nf<R: Rng>(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    state: &RotationState,
    k: usize,
    restarts: usize,
    starts: &[CVector],
    rng: &mut R,
) -> Result<ReflectedPowerBreakdown> {
    let a = CascadeColumns::new(cascade_matrix(FieldModel::NearField, scenario, geom, state, k)?);
    let n = a.num_elements();
    let h_b = CVector::zeros(a.a.nrows());
    let mut best = (CVector::from_element(n, Complex64::new(1.0, 0.0)), 0.0);
    let random: Vec<CVector> = (0..restarts).map(|_| random_phases(n, rng)).collect();
    for v0 in starts.iter().chain(&random) {
        let (v, value) = bcd_optimize(&h_b, &a, v0, 200, 1e-12);
        if value > best.1 {
            best = (v, value);
        }
    }
    let p_bar = a.a.norm_squared() / n as f64;
    Ok(ReflectedPowerBreakdown::new(
        FieldModel::NearField,
        n,
        best.1,
        p_bar,
        best.0,
    ))
}

/// Evaluates `model` at one rotation state with the default restart count.
pub fn reflected_power(
    model: FieldModel,
    scenario: &Scenario,
    geom: &ArrayGeometry,
    state: &RotationState,
    k: usize,
    seed: u64,
) -> Result<ReflectedPowerBreakdown> {
    match model {
        FieldModel::FarField => reflected_power_ff(scenario, geom, state, k),
        FieldModel::NearField => reflected_power_nf(
            scenario,
            geom,
            state,
            k,
            DEFAULT_RESTARTS,
            &[],
            &mut stream(seed, Stream::Analysis),
        ),
    }
}

pub const DEFAULT_RESTARTS: usize = 8;

/// `(η_B, η_I, η_dual)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationGains {
    pub bs: f64,
    pub irs: f64,
    pub dual: f64,
}

/// Ratios of optimized reflected powers to the baseline power.
pub fn rotation_gains(baseline: f64, bs_only: f64, irs_only: f64, dual: f64) -> Result<RotationGains> {
    if !(baseline > 0.0) {
        return Err(Error::UndefinedGain);
    }
    Ok(RotationGains {
        bs: bs_only / baseline,
        irs: irs_only / baseline,
        dual: dual / baseline,
    })
}

/// `|J(Θ₁,ψ₁)J(Θ₂,ψ₂) − J(Θ₁,ψ₂)J(Θ₂,ψ₁)| / max(products)`; zero for a separable `J`.
pub fn separability_residual(
    j: impl Fn(&RotationState) -> Result<f64>,
    theta: [&[BoresightAngles]; 2],
    psi: [EulerOrientation; 2],
) -> Result<f64> {
    let eval = |t: &[BoresightAngles], p: EulerOrientation| {
        j(&RotationState {
            boresights: t.to_vec(),
            orientation: p,
        })
    };
    let diag = eval(theta[0], psi[0])? * eval(theta[1], psi[1])?;
    let cross = eval(theta[0], psi[1])? * eval(theta[1], psi[0])?;
    let scale = diag.max(cross);
    Ok(if scale > 0.0 { (diag - cross).abs() / scale } else { 0.0 })
}

/// Four-point separability residual of the closed-form far-field power.
pub fn ff_separability_check(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    theta: [&[BoresightAngles]; 2],
    psi: [EulerOrientation; 2],
    k: usize,
) -> Result<f64> {
    separability_residual(|s| Ok(reflected_power_ff(scenario, geom, s, k)?.j), theta, psi)
}

/// Boresights maximizing `‖u_B‖²`: each points along the BS→IRS axis, clamped to the cap.
pub fn ff_best_boresights(geom: &ArrayGeometry, theta_max: f64) -> Result<Vec<BoresightAngles>> {
    let toward = -geom.reference_normal;
    let a = angles_from_boresight(&toward, std::f64::consts::PI)?;
    Ok(vec![
        BoresightAngles::new(a.elevation.min(theta_max), a.azimuth);
        geom.num_antennas()
    ])
}

/// Projected-gradient ascent of `f` over `box ∩ {visibility ≥ 0}` using
/// central differences; every accepted step keeps feasibility and does not
/// decrease `f`.
pub fn maximize_orientation(
    f: impl Fn(EulerOrientation) -> Result<f64>,
    geom: &ArrayGeometry,
    limits: &OrientationLimits,
    start: EulerOrientation,
    max_iters: usize,
) -> Result<EulerOrientation> {
    let h = 1e-6;
    let mut psi = start;
    let mut value = f(psi)?;
    if !(value > 0.0) {
        return Ok(psi);
    }
    for _ in 0..max_iters {
        let x = psi.to_vector();
        let mut g = Vector3::zeros();
        for i in 0..3 {
            let mut p = x;
            let mut m = x;
            p[i] += h;
            m[i] -= h;
            let fp = f(limits.clamp(&EulerOrientation::from_vector(&p)));
            let fm = f(limits.clamp(&EulerOrientation::from_vector(&m)));
            g[i] = match (fp, fm) {
                (Ok(a), Ok(b)) => (a - b) / (2.0 * h * value),
                _ => 0.0,
            };
        }
        if g.norm() == 0.0 {
            break;
        }
        let half = Halfspace::linearized(geom.visibility(psi), geom.visibility_gradient(psi), x);
        let mut step = 1.0;
        let mut moved = false;
        while step >= 1e-10 {
            let (cand, _) = dykstra_project(&(x + g * step), limits, &half);
            let cand_psi = EulerOrientation::from_vector(&cand);
            if geom.visibility(cand_psi) >= 0.0 {
                if let Ok(v) = f(cand_psi) {
                    if v >= value && cand != x {
                        moved = (v - value) > 1e-13 * value;
                        psi = cand_psi;
                        value = v;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(psi)
}

/// Optimized far-field powers of the four schemes from the reference state.
#[derive(Debug, Clone)]
pub struct FarFieldGains {
    pub baseline: ReflectedPowerBreakdown,
    pub bs_only: ReflectedPowerBreakdown,
    pub irs_only: ReflectedPowerBreakdown,
    pub dual: ReflectedPowerBreakdown,
    pub gains: RotationGains,
}

pub fn ff_rotation_gains(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    bounds: &RotationBounds,
    k: usize,
) -> Result<FarFieldGains> {
    let m = geom.num_antennas();
    let reference = RotationState::reference(m);
    let theta = ff_best_boresights(geom, bounds.theta_max)?;
    let objective = |t: &[BoresightAngles]| {
        let t = t.to_vec();
        move |p: EulerOrientation| {
            reflected_power_ff(
                scenario,
                geom,
                &RotationState {
                    boresights: t.clone(),
                    orientation: p,
                },
                k,
            )
            .map(|b| b.j)
        }
    };
    let start = EulerOrientation::reference();
    let psi_irs = maximize_orientation(objective(&reference.boresights), geom, &bounds.limits, start, 200)?;
    let psi_dual = maximize_orientation(objective(&theta), geom, &bounds.limits, start, 200)?;
    let eval = |t: &[BoresightAngles], p| {
        reflected_power_ff(
            scenario,
            geom,
            &RotationState {
                boresights: t.to_vec(),
                orientation: p,
            },
            k,
        )
    };
    let baseline = eval(&reference.boresights, start)?;
    let bs_only = eval(&theta, start)?;
    let irs_only = eval(&reference.boresights, psi_irs)?;
    let dual = eval(&theta, psi_dual)?;
    let gains = rotation_gains(baseline.j, bs_only.j, irs_only.j, dual.j)?;
    Ok(FarFieldGains {
        baseline,
        bs_only,
        irs_only,
        dual,
        gains,
    })
}

/// `η_dual = G_p G_β` with `G_p = p̄⋆/p̄₀` and `G_β = β⋆/β₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualDecomposition {
    pub power_gain: f64,
    pub efficiency_gain: f64,
    pub eta_dual: f64,
    pub beta_dual: f64,
    pub beta_fixed: f64,
}

pub fn nf_dual_decomposition(
    baseline: &ReflectedPowerBreakdown,
    optimized: &ReflectedPowerBreakdown,
) -> Result<DualDecomposition> {
    if !(baseline.j > 0.0) || !(baseline.p_bar > 0.0) {
        return Err(Error::UndefinedGain);
    }
    Ok(DualDecomposition {
        power_gain: optimized.p_bar / baseline.p_bar,
        efficiency_gain: optimized.beta / baseline.beta,
        eta_dual: optimized.j / baseline.j,
        beta_dual: optimized.beta,
        beta_fixed: baseline.beta,
    })
}

/// Near-field powers of the four schemes, each optimized by the single-user solver.
#[derive(Debug, Clone)]
pub struct NearFieldGains {
    pub baseline: ReflectedPowerBreakdown,
    pub bs_only: ReflectedPowerBreakdown,
    pub irs_only: ReflectedPowerBreakdown,
    pub dual: ReflectedPowerBreakdown,
    pub dual_state: RotationState,
    /// `‖h‖²` per iteration of the dual-rotation run.
    pub dual_trace: Vec<f64>,
    pub gains: RotationGains,
    pub decomposition: DualDecomposition,
}

/// Runs the single-user solver with each rotation subset enabled from
/// `init` and evaluates the near-field power at every result.
///
/// `scenario` should hold one reflected-only user.
pub fn nf_rotation_gains(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    controls: &SuControls,
    init: &AoInit,
    restarts: usize,
    seed: u64,
) -> Result<NearFieldGains> {
    let mut rng = stream(seed, Stream::Analysis);
    let mut solve = |bs: bool, irs: bool| -> Result<(ReflectedPowerBreakdown, RotationState, Vec<f64>)> {
        let c = SuControls {
            rotate_bs: bs,
            rotate_irs: irs,
            ..*controls
        };
        let rep = su_alternating_optimize(scenario, geom, init, &c)?;
        let b = reflected_power_nf(
            scenario,
            geom,
            &rep.state,
            0,
            restarts,
            std::slice::from_ref(&rep.phases),
            &mut rng,
        )?;
        Ok((b, rep.state, rep.trace))
    };
    let (baseline, ..) = solve(false, false)?;
    let (bs_only, ..) = solve(true, false)?;
    let (irs_only, ..) = solve(false, true)?;
    let (dual, dual_state, dual_trace) = solve(true, true)?;
    let gains = rotation_gains(baseline.j, bs_only.j, irs_only.j, dual.j)?;
    let decomposition = nf_dual_decomposition(&baseline, &dual)?;
    Ok(NearFieldGains {
        baseline,
        bs_only,
        irs_only,
        dual,
        dual_state,
        dual_trace,
        gains,
        decomposition,
    })
}

/// IRS–BS alignment statistics over all `(n, m)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentStats {
    /// Mean of `ρ_{n,m} = n(ψ)ᵀ d̂_{n,m}`.
    pub rho_mean: f64,
    /// Mean of `ρ²`.
    pub rho_sq_mean: f64,
    /// Standard deviation of `ρ`.
    pub delta: f64,
    /// Variance of `G^ref_{n,m} = G_0 ρ^{2p}`.
    pub gain_variance: f64,
    /// Mean of `G^ref_{n,m}`.
    pub gain_mean: f64,
    /// `Σ G^ref_{n,m}`.
    pub aggregate_gain: f64,
    pub xi: f64,
    pub pairs: usize,
}

pub fn alignment_stats(geom: &ArrayGeometry, pattern: &GainPattern, psi: EulerOrientation) -> AlignmentStats {
    let normal = irs_normal(geom, psi);
    let positions = irs_element_positions(geom, psi);
    let mut rho = Vec::with_capacity(positions.len() * geom.num_antennas());
    for m in 0..geom.num_antennas() {
        let b = geom.antenna_position(m);
        for r in &positions {
            rho.push(normal.dot(&(b - r).normalize()));
        }
    }
    let count = rho.len() as f64;
    let rho_mean = rho.iter().sum::<f64>() / count;
    let rho_sq_mean = rho.iter().map(|x| x * x).sum::<f64>() / count;
    let delta = (rho.iter().map(|x| (x - rho_mean).powi(2)).sum::<f64>() / count).sqrt();
    let gains: Vec<f64> = rho.iter().map(|&x| pattern.gain(x)).collect();
    let aggregate_gain: f64 = gains.iter().sum();
    let gain_mean = aggregate_gain / count;
    let gain_variance = gains.iter().map(|g| (g - gain_mean).powi(2)).sum::<f64>() / count;
    AlignmentStats {
        rho_mean,
        rho_sq_mean,
        delta,
        gain_variance,
        gain_mean,
        aggregate_gain,
        xi: geom.xi(),
        pairs: rho.len(),
    }
}

/// Outcome of the aggregate-gain inequalities and the `Δ/ξ` trend.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub samples: usize,
    /// Samples with `G > MN G_0 ρ̄`.
    pub mean_bound_violations: usize,
    /// Samples with `G > MN G_0 (1 − Δ²)`.
    pub spread_bound_violations: usize,
    /// Smallest relative slack `(bound − G)/bound` over both inequalities.
    pub min_slack: f64,
    /// `(ξ, Δ)` along the sweep.
    pub sweep: Vec<(f64, f64)>,
}

impl AlignmentReport {
    /// `max(Δ/ξ) / (Δ/ξ at the smallest ξ)`.
    pub fn slope_ratio(&self) -> f64 {
        let slopes: Vec<f64> = self.sweep.iter().map(|(x, d)| d / x).collect();
        slopes.iter().cloned().fold(f64::MIN, f64::max) / slopes[0]
    }
}

/// Checks both gain inequalities at `samples` random `(ψ, d_RB)` pairs and
/// evaluates `Δ` at `trend_psi` along the `xis` sweep.
pub fn alignment_check(
    cfg: &ScenarioConfig,
    samples: usize,
    xi_range: (f64, f64),
    xis: &[f64],
    trend_psi: EulerOrientation,
    seed: u64,
) -> Result<AlignmentReport> {
    let pattern = GainPattern::new(cfg.irs_exponent)?;
    let limits = cfg.orientation_limits();
    let mut rng = stream(seed, Stream::Analysis);
    let mut report = AlignmentReport {
        samples: 0,
        mean_bound_violations: 0,
        spread_bound_violations: 0,
        min_slack: f64::INFINITY,
        sweep: Vec::with_capacity(xis.len()),
    };
    while report.samples < samples {
        let xi = rng.random_range(xi_range.0..=xi_range.1);
        let geom = build_geometry(&cfg.with_xi(xi)?)?;
        let upper = limits.upper();
        let psi = EulerOrientation::new(
            rng.random_range(-upper[0]..=upper[0]),
            rng.random_range(-upper[1]..=upper[1]),
            rng.random_range(-upper[2]..=upper[2]),
        );
        if geom.visibility(psi) < 0.0 {
            continue;
        }
        let s = alignment_stats(&geom, &pattern, psi);
        let scale = s.pairs as f64 * pattern.peak();
        let mean_bound = scale * s.rho_mean;
        let spread_bound = scale * (1.0 - s.delta * s.delta);
        if s.aggregate_gain > mean_bound {
            report.mean_bound_violations += 1;
        }
        if s.aggregate_gain > spread_bound {
            report.spread_bound_violations += 1;
        }
        let slack =
            ((mean_bound - s.aggregate_gain) / mean_bound).min((spread_bound - s.aggregate_gain) / spread_bound);
        report.min_slack = report.min_slack.min(slack);
        report.samples += 1;
    }
    for &xi in xis {
        let geom = build_geometry(&cfg.with_xi(xi)?)?;
        report
            .sweep
            .push((geom.xi(), alignment_stats(&geom, &pattern, trend_psi).delta));
    }
    Ok(report)
}

/// One reflected-only LoS user near the IRS boresight: around the point where
/// the reference IRS normal meets the plane at user height, with the
/// horizontal range scaled by a factor in [0.8, 1.2] and the azimuth offset
/// by up to ±15°.
pub fn front_of_irs_scenario(cfg: &ScenarioConfig, geom: &ArrayGeometry, seed: u64) -> Result<Scenario> {
    let n0 = geom.reference_normal;
    let drop = geom.irs_center[2] - cfg.user_height;
    if !(n0[2] < 0.0 && drop > 0.0) {
        return Err(Error::InvalidArgument(
            "reference IRS normal does not reach the user plane".into(),
        ));
    }
    let mut rng = stream(seed, Stream::Scenario);
    let range = drop / -n0[2] * n0[0].hypot(n0[1]) * rng.random_range(0.8..=1.2);
    let azimuth = n0[1].atan2(n0[0]) + rng.random_range(-15f64..=15.0).to_radians();
    let user = Vector3::new(
        geom.irs_center[0] + range * azimuth.cos(),
        geom.irs_center[1] + range * azimuth.sin(),
        cfg.user_height,
    );
    Ok(Scenario::line_of_sight(
        &[user],
        geom.bs_center,
        geom.irs_center,
        geom.wavelength,
        false,
        cfg.tx_power_watts(),
        cfg.noise_watts(),
        GainPattern::new(cfg.bs_exponent)?,
        GainPattern::new(cfg.irs_exponent)?,
    ))
}

/// One `(ξ, trial)` point of the near-field decomposition sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRow {
    pub xi: f64,
    pub trial: u64,
    pub seed: u64,
    pub status: String,
    pub power_gain: f64,
    pub efficiency_gain: f64,
    pub eta_dual: f64,
    pub eta_bs: f64,
    pub eta_irs: f64,
    pub beta_dual: f64,
    pub beta_fixed: f64,
    pub alignment: Option<AlignmentStats>,
    pub trace: Vec<f64>,
}

pub fn decompose_point(cfg: &ScenarioConfig, xi: f64, trial: u64, seed: u64) -> DecompositionRow {
    let run = || -> Result<(NearFieldGains, AlignmentStats)> {
        let cfg = cfg.with_xi(xi)?;
        let geom = build_geometry(&cfg)?;
        let scenario = front_of_irs_scenario(&cfg, &geom, seed)?;
        let init = AoInit {
            phases: random_phases(geom.num_elements(), &mut stream(seed, Stream::PhaseInit)),
            state: RotationState::reference(geom.num_antennas()),
        };
        let controls = SuControls::new(RotationBounds {
            theta_max: cfg.theta_max(),
            limits: cfg.orientation_limits(),
        });
        let gains = nf_rotation_gains(&scenario, &geom, &controls, &init, DEFAULT_RESTARTS, seed)?;
        let stats = alignment_stats(&geom, &scenario.irs_pattern, gains.dual_state.orientation);
        Ok((gains, stats))
    };
    match run() {
        Ok((g, stats)) => DecompositionRow {
            xi,
            trial,
            seed,
            status: "ok".into(),
            power_gain: g.decomposition.power_gain,
            efficiency_gain: g.decomposition.efficiency_gain,
            eta_dual: g.decomposition.eta_dual,
            eta_bs: g.gains.bs,
            eta_irs: g.gains.irs,
            beta_dual: g.decomposition.beta_dual,
            beta_fixed: g.decomposition.beta_fixed,
            alignment: Some(stats),
            trace: g.dual_trace,
        },
        Err(e) => DecompositionRow {
            xi,
            trial,
            seed,
            status: e.to_string(),
            power_gain: f64::NAN,
            efficiency_gain: f64::NAN,
            eta_dual: f64::NAN,
            eta_bs: f64::NAN,
            eta_irs: f64::NAN,
            beta_dual: f64::NAN,
            beta_fixed: f64::NAN,
            alignment: None,
            trace: Vec::new(),
        },
    }
}

/// Decomposition at every `(ξ, trial)` with trial seeds derived from `cfg.seed`.
pub fn decompose_sweep(cfg: &ScenarioConfig, xis: &[f64], exec: Execution) -> Result<Vec<DecompositionRow>> {
    cfg.validate()?;
    let jobs: Vec<(f64, u64)> = xis
        .iter()
        .flat_map(|&xi| (0..cfg.trials as u64).map(move |t| (xi, t)))
        .collect();
    Ok(exec.map(jobs, |(xi, t)| decompose_point(cfg, xi, t, trial_seed(cfg.seed, t))))
}

/// Per-ξ means of the successful rows, in sweep order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionSummary {
    pub xi: f64,
    pub runs: usize,
    pub power_gain: f64,
    pub efficiency_gain: f64,
    pub eta_dual: f64,
    pub beta_dual: f64,
    pub beta_fixed: f64,
}

pub fn summarize_decomposition(rows: &[DecompositionRow]) -> Vec<DecompositionSummary> {
    let mut out: Vec<DecompositionSummary> = Vec::new();
    for r in rows {
        let idx = match out.iter().position(|s| s.xi == r.xi) {
            Some(i) => i,
            None => {
                out.push(DecompositionSummary {
                    xi: r.xi,
                    runs: 0,
                    power_gain: 0.0,
                    efficiency_gain: 0.0,
                    eta_dual: 0.0,
                    beta_dual: 0.0,
                    beta_fixed: 0.0,
                });
                out.len() - 1
            }
        };
        if r.status != "ok" {
            continue;
        }
        let s = &mut out[idx];
        s.runs += 1;
        s.power_gain += r.power_gain;
        s.efficiency_gain += r.efficiency_gain;
        s.eta_dual += r.eta_dual;
        s.beta_dual += r.beta_dual;
        s.beta_fixed += r.beta_fixed;
    }
    for s in &mut out {
        let n = s.runs as f64;
        s.power_gain /= n;
        s.efficiency_gain /= n;
        s.eta_dual /= n;
        s.beta_dual /= n;
        s.beta_fixed /= n;
    }
    out
}

/// Min–max normalization to `[0, 1]`; a constant input maps to zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

/// Uniform boresights on the cap and a uniform orientation in the box, redrawn until visible.
pub fn random_feasible_state<R: Rng>(cfg: &ScenarioConfig, geom: &ArrayGeometry, rng: &mut R) -> RotationState {
    let upper = cfg.orientation_limits().upper();
    loop {
        let psi = EulerOrientation::new(
            rng.random_range(-upper[0]..=upper[0]),
            rng.random_range(-upper[1]..=upper[1]),
            rng.random_range(-upper[2]..=upper[2]),
        );
        if geom.visibility(psi) < 0.0 {
            continue;
        }
        let boresights = (0..geom.num_antennas())
            .map(|_| {
                BoresightAngles::new(
                    rng.random_range(0.0..=cfg.theta_max()),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        return RotationState {
            boresights,
            orientation: psi,
        };
    }
}

/// Far-field separability and combining efficiency over random rotation pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparabilityReport {
    pub pairs: usize,
    pub max_residual: f64,
    /// Largest `|β_FF − 1|` over all evaluated states with a nonzero cascade.
    pub max_beta_deviation: f64,
}

pub fn separability_check(cfg: &ScenarioConfig, pairs: usize, seed: u64) -> Result<SeparabilityReport> {
    let geom = build_geometry(cfg)?;
    let mut rng = stream(seed, Stream::Analysis);
    let mut report = SeparabilityReport {
        pairs,
        max_residual: 0.0,
        max_beta_deviation: 0.0,
    };
    for p in 0..pairs {
        let scenario = front_of_irs_scenario(cfg, &geom, trial_seed(seed, p as u64))?;
        let s1 = random_feasible_state(cfg, &geom, &mut rng);
        let s2 = random_feasible_state(cfg, &geom, &mut rng);
        let r = ff_separability_check(
            &scenario,
            &geom,
            [&s1.boresights, &s2.boresights],
            [s1.orientation, s2.orientation],
            0,
        )?;
        report.max_residual = report.max_residual.max(r);
        for s in [&s1, &s2] {
            let b = reflected_power_ff(&scenario, &geom, s, 0)?;
            if !b.is_zero() {
                report.max_beta_deviation = report.max_beta_deviation.max((b.beta - 1.0).abs());
            }
        }
    }
    Ok(report)
}

/// Near-field power bounds over random geometries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBoundReport {
    pub instances: usize,
    /// Instances whose cascade vanished (user outside the IRS front hemisphere).
    pub zero_instances: usize,
    /// Largest `‖A v‖² / (N² p̄)` over all random `v`.
    pub max_upper_ratio: f64,
    /// Smallest `J / (N p̄)` of the multi-start optimum.
    pub min_lower_ratio: f64,
    pub max_beta: f64,
}

/// For each IRS size and geometry: a random `ξ`, user and feasible state,
/// `random_v` random phase vectors against the upper bound and a best-of-`restarts`
/// BCD optimum against the lower bound.
pub fn power_bound_check(
    cfg: &ScenarioConfig,
    sides: &[usize],
    geometries: usize,
    random_v: usize,
    restarts: usize,
    seed: u64,
) -> Result<PowerBoundReport> {
    let mut rng = stream(seed, Stream::Analysis);
    let mut report = PowerBoundReport {
        instances: 0,
        zero_instances: 0,
        max_upper_ratio: 0.0,
        min_lower_ratio: f64::INFINITY,
        max_beta: 0.0,
    };
    for &side in sides {
        let sized = ScenarioConfig {
            irs_side: side,
            ..cfg.clone()
        };
        for g in 0..geometries {
            let c = sized.with_xi(rng.random_range(0.05..=0.7))?;
            let geom = build_geometry(&c)?;
            let scenario = front_of_irs_scenario(&c, &geom, trial_seed(seed, (side * geometries + g) as u64))?;
            let state = random_feasible_state(&c, &geom, &mut rng);
            let bd = reflected_power_nf(&scenario, &geom, &state, 0, restarts, &[], &mut rng)?;
            report.instances += 1;
            if bd.is_zero() {
                report.zero_instances += 1;
                continue;
            }
            let a = cascade_matrix(FieldModel::NearField, &scenario, &geom, &state, 0)?;
            for _ in 0..random_v {
                let v = random_phases(geom.num_elements(), &mut rng);
                report.max_upper_ratio = report.max_upper_ratio.max((&a * v).norm_squared() / bd.upper_bound());
            }
            report.max_upper_ratio = report.max_upper_ratio.max(bd.j / bd.upper_bound());
            report.min_lower_ratio = report.min_lower_ratio.min(bd.j / bd.lower_bound());
            report.max_beta = report.max_beta.max(bd.beta);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(side: usize) -> ScenarioConfig {
        ScenarioConfig {
            irs_side: side,
            ..ScenarioConfig::default()
        }
    }

    fn user(cfg: &ScenarioConfig, geom: &ArrayGeometry, seed: u64) -> Scenario {
        front_of_irs_scenario(cfg, geom, seed).unwrap()
    }

    /// Best `‖A v‖²` over a `levels³` phase grid of width `span` centred on `centre`.
    fn grid_max(a: &CMatrix, centre: [f64; 3], span: f64, levels: usize) -> (f64, [f64; 3]) {
        let at = |c: f64, i: usize| c - span / 2.0 + span * i as f64 / levels as f64;
        let mut best = (0.0, centre);
        for i in 0..levels {
            for j in 0..levels {
                for l in 0..levels {
                    let t = [at(centre[0], i), at(centre[1], j), at(centre[2], l)];
                    let v = CVector::from_iterator(3, t.iter().map(|&x| Complex64::from_polar(1.0, x)));
                    let value = (a * v).norm_squared();
                    if value > best.0 {
                        best = (value, t);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn ff_closed_form_matches_phase_grid() {
        let c = cfg(3);
        let mut geom3 = build_geometry(&c).unwrap();
        geom3.irs_reference_offsets.truncate(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sc = user(&c, &geom3, 3);
        let state = random_feasible_state(&c, &geom3, &mut rng);
        let bd = reflected_power_ff(&sc, &geom3, &state, 0).unwrap();
        let a = cascade_matrix(FieldModel::FarField, &sc, &geom3, &state, 0).unwrap();
        let coarse = grid_max(&a, [0.0; 3], std::f64::consts::TAU, 32);
        let (best, _) = grid_max(&a, coarse.1, 2.0 * std::f64::consts::TAU / 32.0, 32);
        assert!((bd.j - best).abs() <= 1e-3 * bd.j, "{} vs {best}", bd.j);
        assert!(best <= bd.j * (1.0 + 1e-12));
    }

    #[test]
    fn ff_breakdown_identities() {
        let c = cfg(7);
        let geom = build_geometry(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..20 {
            let sc = user(&c, &geom, seed);
            let state = random_feasible_state(&c, &geom, &mut rng);
            let bd = reflected_power_ff(&sc, &geom, &state, 0).unwrap();
            if bd.is_zero() {
                assert!(bd.beta.is_nan());
                continue;
            }
            assert!((bd.beta - 1.0).abs() < 1e-12, "{}", bd.beta);
            let n = bd.num_elements as f64;
            assert!((bd.j - n * n * bd.p_bar * bd.beta).abs() <= 1e-9 * bd.j);
            let a = cascade_matrix(FieldModel::FarField, &sc, &geom, &state, 0).unwrap();
            assert!(((&a * &bd.phases).norm_squared() - bd.j).abs() <= 1e-9 * bd.j);
        }
    }

    #[test]
    fn ff_beta_of_unequal_magnitudes() {
        let bd = ReflectedPowerBreakdown::new(FieldModel::FarField, 2, 1.0, 0.5, CVector::zeros(2));
        assert_eq!(bd.beta, 0.5);
        let zero = ReflectedPowerBreakdown::new(FieldModel::FarField, 2, 0.0, 0.0, CVector::zeros(2));
        assert!(zero.is_zero() && zero.beta.is_nan());
    }

    #[test]
    fn ff_separability() {
        let c = cfg(7);
        let geom = build_geometry(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sc = user(&c, &geom, 4);
        for _ in 0..50 {
            let s1 = random_feasible_state(&c, &geom, &mut rng);
            let s2 = random_feasible_state(&c, &geom, &mut rng);
            let r = ff_separability_check(
                &sc,
                &geom,
                [&s1.boresights, &s2.boresights],
                [s1.orientation, s2.orientation],
                0,
            )
            .unwrap();
            assert!(r < 1e-9, "{r}");
        }
        let s = random_feasible_state(&c, &geom, &mut rng);
        let t = random_feasible_state(&c, &geom, &mut rng);
        let same = ff_separability_check(
            &sc,
            &geom,
            [&s.boresights, &s.boresights],
            [s.orientation, t.orientation],
            0,
        )
        .unwrap();
        assert_eq!(same, 0.0);
    }

    #[test]
    fn nf_couples_rotations_at_large_xi() {
        let c = cfg(7).with_xi(0.7).unwrap();
        let geom = build_geometry(&c).unwrap();
        let sc = user(&c, &geom, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let s1 = random_feasible_state(&c, &geom, &mut rng);
            let s2 = random_feasible_state(&c, &geom, &mut rng);
            let nf =
                |s: &RotationState| cascade_matrix(FieldModel::NearField, &sc, &geom, s, 0).map(|a| a.norm_squared());
            let r =
                separability_residual(nf, [&s1.boresights, &s2.boresights], [s1.orientation, s2.orientation]).unwrap();
            worst = worst.max(r);
        }
        assert!(worst > 1e-6, "{worst}");
    }

    #[test]
    fn nf_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..10 {
            let c = cfg(5).with_xi(rng.random_range(0.1..0.7)).unwrap();
            let geom = build_geometry(&c).unwrap();
            let sc = user(&c, &geom, seed);
            let state = random_feasible_state(&c, &geom, &mut rng);
            let bd = reflected_power_nf(&sc, &geom, &state, 0, 8, &[], &mut rng).unwrap();
            if bd.is_zero() {
                continue;
            }
            assert!(bd.j >= bd.lower_bound());
            assert!(bd.beta <= 1.0 + 1e-9);
            let n = bd.num_elements as f64;
            assert!((bd.j - n * n * bd.p_bar * bd.beta).abs() <= 1e-9 * bd.j);
            let a = cascade_matrix(FieldModel::NearField, &sc, &geom, &state, 0).unwrap();
            for _ in 0..100 {
                assert!((&a * random_phases(25, &mut rng)).norm_squared() <= bd.upper_bound() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn nf_small_instance_matches_grid() {
        let c = cfg(7).with_xi(0.6).unwrap();
        let geom = build_geometry(&c).unwrap();
        let mut geom3 = geom.clone();
        geom3.irs_reference_offsets = vec![
            geom.irs_reference_offsets[0],
            geom.irs_reference_offsets[24],
            geom.irs_reference_offsets[48],
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..5 {
            let sc = user(&c, &geom3, seed);
            let state = random_feasible_state(&c, &geom3, &mut rng);
            let bd = reflected_power_nf(&sc, &geom3, &state, 0, 8, &[], &mut rng).unwrap();
            let a = cascade_matrix(FieldModel::NearField, &sc, &geom3, &state, 0).unwrap();
            let levels = 16;
            let mut best: f64 = 0.0;
            let ph = |x: usize| Complex64::from_polar(1.0, std::f64::consts::TAU * x as f64 / levels as f64);
            for i in 0..levels {
                for j in 0..levels {
                    let v = CVector::from_vec(vec![Complex64::new(1.0, 0.0), ph(i), ph(j)]);
                    best = best.max((&a * v).norm_squared());
                }
            }
            assert!(bd.j >= best * (1.0 - 1e-3), "{} vs {best}", bd.j);
        }
    }

    #[test]
    fn gains_from_baseline_are_one() {
        let g = rotation_gains(2.0, 2.0, 2.0, 2.0).unwrap();
        assert_eq!((g.bs, g.irs, g.dual), (1.0, 1.0, 1.0));
        assert!(matches!(rotation_gains(0.0, 1.0, 1.0, 1.0), Err(Error::UndefinedGain)));
        let b = ReflectedPowerBreakdown::new(FieldModel::NearField, 4, 3.0, 0.5, CVector::zeros(4));
        let d = nf_dual_decomposition(&b, &b).unwrap();
        assert_eq!((d.power_gain, d.efficiency_gain, d.eta_dual), (1.0, 1.0, 1.0));
    }

    #[test]
    fn ff_dual_gain_is_product() {
        let c = cfg(7);
        let geom = build_geometry(&c).unwrap();
        let bounds = RotationBounds {
            theta_max: c.theta_max(),
            limits: c.orientation_limits(),
        };
        for seed in 0..5 {
            let sc = user(&c, &geom, seed);
            let g = ff_rotation_gains(&sc, &geom, &bounds, 0).unwrap();
            assert!(g.gains.bs >= 1.0 - 1e-6 && g.gains.irs >= 1.0 - 1e-6);
            assert!((g.gains.dual - g.gains.bs * g.gains.irs).abs() <= 1e-6 * g.gains.dual);
        }
    }

    #[test]
    fn decomposition_identity_on_small_instance() {
        let c = ScenarioConfig {
            irs_side: 5,
            bs_cols: 2,
            bs_rows: 2,
            ..ScenarioConfig::default()
        };
        for seed in 0..3 {
            let r = decompose_point(&c, 0.5, 0, seed);
            assert_eq!(r.status, "ok");
            assert!((r.power_gain * r.efficiency_gain - r.eta_dual).abs() <= 1e-9 * r.eta_dual);
            assert!(r.eta_dual >= 1.0 - 1e-6 && r.eta_bs >= 1.0 - 1e-6 && r.eta_irs >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn alignment_trivial_cases() {
        let c = ScenarioConfig {
            irs_side: 1,
            bs_cols: 1,
            bs_rows: 1,
            ..ScenarioConfig::default()
        };
        let geom = build_geometry(&c).unwrap();
        let pattern = GainPattern::new(c.irs_exponent).unwrap();
        let s = alignment_stats(&geom, &pattern, EulerOrientation::reference());
        assert_eq!((s.delta, s.gain_variance), (0.0, 0.0));
        assert!((s.rho_mean - 1.0).abs() < 1e-12);
        assert!((s.aggregate_gain - pattern.peak()).abs() < 1e-9);
        let d = build_geometry(&ScenarioConfig::default()).unwrap();
        assert!((alignment_stats(&d, &pattern, EulerOrientation::reference()).xi - 0.1179).abs() < 1e-4);
    }

    #[test]
    fn gain_inequalities_and_spread_trend() {
        let c = cfg(11);
        let xis = crate::harness::SweepAxis::Xi.default_values();
        let rep = alignment_check(&c, 50, (0.05, 0.7), &xis, EulerOrientation::new(0.3, 0.2, -0.2), 7).unwrap();
        assert_eq!(rep.samples, 50);
        assert_eq!((rep.mean_bound_violations, rep.spread_bound_violations), (0, 0));
        assert!(rep.min_slack >= 0.0);
        assert!(rep.slope_ratio() <= 2.0, "{:?}", rep.sweep);
        assert!(rep.sweep.windows(2).all(|w| w[1].1 >= w[0].1));
    }

    #[test]
    fn property_suites_on_small_arrays() {
        let c = cfg(7);
        let r1 = separability_check(&c, 10, 1).unwrap();
        assert!(r1.max_residual < 1e-9 && r1.max_beta_deviation < 1e-12, "{r1:?}");
        let r2 = power_bound_check(&c, &[3, 5], 5, 50, 8, 2).unwrap();
        assert_eq!(r2.instances, 10);
        assert!(r2.max_upper_ratio <= 1.0 + 1e-12, "{r2:?}");
        assert!(r2.min_lower_ratio >= 1.0 && r2.max_beta <= 1.0 + 1e-9, "{r2:?}");
    }

    #[test]
    fn spread_order_depends_on_orientation() {
        let c = ScenarioConfig::default();
        let pattern = GainPattern::new(c.irs_exponent).unwrap();
        let delta =
            |xi: f64, psi| alignment_stats(&build_geometry(&c.with_xi(xi).unwrap()).unwrap(), &pattern, psi).delta;
        let at_reference = delta(0.2, EulerOrientation::reference()) / delta(0.1, EulerOrientation::reference());
        assert!((3.2..=4.8).contains(&at_reference), "{at_reference}");
        let tilted = EulerOrientation::new(0.3, 0.2, -0.2);
        let off_reference = delta(0.2, tilted) / delta(0.1, tilted);
        assert!((1.6..=2.4).contains(&off_reference), "{off_reference}");
    }

    #[test]
    fn normalization() {
        assert_eq!(min_max_normalize(&[2.0, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(min_max_normalize(&[1.0, 1.0]), vec![0.0, 0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn alignment_variance_identity(a in -0.5f64..0.5, b in -0.5f64..0.5, p in -0.5f64..0.5, xi in 0.05f64..0.7) {
            let c = cfg(5).with_xi(xi).unwrap();
            let geom = build_geometry(&c).unwrap();
            let psi = EulerOrientation::new(a, b, p);
            prop_assume!(geom.visibility(psi) >= 0.0);
            let s = alignment_stats(&geom, &GainPattern::new(c.irs_exponent).unwrap(), psi);
            prop_assert!((s.delta * s.delta - (s.rho_sq_mean - s.rho_mean * s.rho_mean)).abs() < 1e-12);
            prop_assert!(s.delta >= 0.0);
            prop_assert!(s.rho_mean > 0.0 && s.rho_mean <= 1.0);
        }
    }
}
