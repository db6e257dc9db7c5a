//! Seeded Monte Carlo runs of the four schemes and parameter sweeps.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::analysis::alignment_stats;
use crate::channel::{sample_scenario, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, RotationState};
use crate::harness::config::{build_geometry, ScenarioConfig};
use crate::harness::parallel::Execution;
use crate::manifold::{random_phases, RcgControls};
use crate::mu_solver::{ao_optimize, AoControls, AoInit, RotationBounds, RotationControls, Scheme, SolveReport};
use crate::rng::{stream, trial_seed, Stream};

/// Solver controls taken from a config.
pub fn ao_controls(cfg: &ScenarioConfig) -> AoControls {
    AoControls {
        tol: cfg.ao_tol,
        max_iters: cfg.ao_max_iters,
        fp_iters: cfg.fp_iters,
        rcg: RcgControls {
            max_iters: cfg.rcg_max_iters,
            ..RcgControls::default()
        },
        rotation: RotationControls {
            tol: cfg.rot_tol,
            floor: cfg.rot_floor,
            max_iters: cfg.rot_max_iters,
            step_max: cfg.step_max,
            step_min: cfg.step_min,
            backtrack: cfg.backtrack,
            bb_init: cfg.bb_init,
            bb_min: cfg.bb_min,
            bb_max: cfg.bb_max,
        },
        bounds: RotationBounds {
            theta_max: cfg.theta_max(),
            limits: cfg.orientation_limits(),
        },
    }
}

/// One converged run of one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub scheme: Scheme,
    pub axis: String,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    /// `"ok"` or the error that stopped the run.
    pub status: String,
    /// `"cold"` or `"warm:<scheme>"` for a run continued from a contained scheme.
    pub start: String,
    pub initial_rate: f64,
    pub sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub xi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub mean_elevation: f64,
    pub fp_rejections: usize,
    /// Alignment statistics of the IRS–BS link at the final orientation.
    pub rho_mean: f64,
    pub delta: f64,
    pub gain_variance: f64,
    pub trace: Vec<f64>,
}

impl ExperimentResult {
    fn failed(scheme: Scheme, axis: &str, value: f64, trial: usize, seed: u64, err: &Error) -> Self {
        Self {
            scheme,
            axis: axis.to_string(),
            value,
            trial,
            seed,
            status: err.to_string(),
            start: "cold".into(),
            initial_rate: f64::NAN,
            sum_rate: f64::NAN,
            iterations: 0,
            converged: false,
            xi: f64::NAN,
            alpha: f64::NAN,
            beta: f64::NAN,
            phi: f64::NAN,
            mean_elevation: f64::NAN,
            fp_rejections: 0,
            rho_mean: f64::NAN,
            delta: f64::NAN,
            gain_variance: f64::NAN,
            trace: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Schemes whose feasible sets are contained in that of `scheme`, one level down.
pub fn sub_schemes(scheme: Scheme) -> &'static [Scheme] {
    match scheme {
        Scheme::Dual => &[Scheme::BsOnly, Scheme::IrsOnly],
        Scheme::BsOnly | Scheme::IrsOnly => &[Scheme::Fixed],
        Scheme::Fixed => &[],
    }
}

/// A solved scheme and, for warm-started runs, the scheme it continued from.
#[derive(Debug, Clone)]
pub struct SchemeSolution {
    pub report: SolveReport,
    pub warm_from: Option<Scheme>,
}

/// Solves each listed scheme from `init`.
///
/// With `nested` set, schemes are solved from the most restricted upward and
/// each one is additionally continued from every contained scheme's solution
/// that beats its own cold start; the better run is kept. Converged rates then
/// respect the inclusion order of the feasible sets on every instance.
pub fn solve_schemes(
    scenario: &Scenario,
    geom: &ArrayGeometry,
    init: &AoInit,
    controls: &AoControls,
    schemes: &[Scheme],
    nested: bool,
) -> Vec<Result<SchemeSolution>> {
    let mut needed = [false; 4];
    let mut stack: Vec<Scheme> = schemes.to_vec();
    while let Some(s) = stack.pop() {
        if !needed[slot(s)] {
            needed[slot(s)] = true;
            if nested {
                stack.extend_from_slice(sub_schemes(s));
            }
        }
    }
    let mut solved: [Option<Result<SchemeSolution>>; 4] = Default::default();
    for s in [Scheme::Fixed, Scheme::BsOnly, Scheme::IrsOnly, Scheme::Dual] {
        if !needed[slot(s)] {
            continue;
        }
        let outcome = ao_optimize(scenario, geom, init, controls, s).map(|report| {
            let mut best = SchemeSolution {
                report,
                warm_from: None,
            };
            if nested {
                for &sub in sub_schemes(s) {
                    let Some(Ok(base)) = &solved[slot(sub)] else { continue };
                    if base.report.sum_rate() <= best.report.sum_rate() {
                        continue;
                    }
                    let warm = AoInit {
                        phases: base.report.phases.clone(),
                        state: base.report.state.clone(),
                    };
                    if let Ok(report) = ao_optimize(scenario, geom, &warm, controls, s) {
                        if report.sum_rate() > best.report.sum_rate() {
                            best = SchemeSolution {
                                report,
                                warm_from: Some(sub),
                            };
                        }
                    }
                }
            }
            best
        });
        solved[slot(s)] = Some(outcome);
    }
    schemes
        .iter()
        .map(|&s| {
            solved[slot(s)]
                .take()
                .unwrap_or_else(|| Err(Error::InvalidArgument(format!("scheme `{s}` listed twice"))))
        })
        .collect()
}

fn slot(s: Scheme) -> usize {
    match s {
        Scheme::Dual => 0,
        Scheme::BsOnly => 1,
        Scheme::IrsOnly => 2,
        Scheme::Fixed => 3,
    }
}

/// Runs every listed scheme on the scenario drawn from `seed`, with a shared
/// phase initialization and reference rotations.
///
/// Failures are reported in the `status` column rather than returned.
pub fn run_trial(
    cfg: &ScenarioConfig,
    schemes: &[Scheme],
    axis: &str,
    value: f64,
    trial: usize,
    seed: u64,
) -> Vec<ExperimentResult> {
    let prepared = (|| -> Result<_> {
        cfg.validate()?;
        let geom = build_geometry(cfg)?;
        let scenario = sample_scenario(cfg, seed)?;
        let mut rng = stream(seed, Stream::PhaseInit);
        let init = AoInit {
            phases: random_phases(geom.num_elements(), &mut rng),
            state: RotationState::reference(geom.num_antennas()),
        };
        Ok((geom, scenario, init))
    })();
    let (geom, scenario, init) = match prepared {
        Ok(p) => p,
        Err(e) => {
            return schemes
                .iter()
                .map(|&s| ExperimentResult::failed(s, axis, value, trial, seed, &e))
                .collect()
        }
    };
    let controls = ao_controls(cfg);
    let solutions = solve_schemes(&scenario, &geom, &init, &controls, schemes, cfg.nested_warm_start);
    schemes
        .iter()
        .zip(solutions)
        .map(|(&scheme, sol)| match sol {
            Ok(SchemeSolution { report: rep, warm_from }) => {
                let o = rep.state.orientation;
                let mean_elevation =
                    rep.state.boresights.iter().map(|a| a.elevation).sum::<f64>() / rep.state.boresights.len() as f64;
                let align = alignment_stats(&geom, &scenario.irs_pattern, o);
                ExperimentResult {
                    scheme,
                    axis: axis.to_string(),
                    value,
                    trial,
                    seed,
                    status: "ok".into(),
                    start: warm_from.map_or_else(|| "cold".to_string(), |s| format!("warm:{s}")),
                    initial_rate: rep.trace[0],
                    sum_rate: rep.sum_rate(),
                    iterations: rep.iterations,
                    converged: rep.converged,
                    xi: geom.xi(),
                    alpha: o.alpha,
                    beta: o.beta,
                    phi: o.phi,
                    mean_elevation,
                    fp_rejections: rep.fp_rejections,
                    rho_mean: align.rho_mean,
                    delta: align.delta,
                    gain_variance: align.gain_variance,
                    trace: rep.trace,
                }
            }
            Err(e) => ExperimentResult::failed(scheme, axis, value, trial, seed, &e),
        })
        .collect()
}

/// Runs `cfg.trials` trials of every scheme at the config's own parameters.
pub fn run_schemes(cfg: &ScenarioConfig, schemes: &[Scheme], exec: Execution) -> Vec<ExperimentResult> {
    let jobs: Vec<usize> = (0..cfg.trials).collect();
    exec.map(jobs, |t| {
        run_trial(cfg, schemes, "none", 0.0, t, trial_seed(cfg.seed, t as u64))
    })
    .into_iter()
    .flatten()
    .collect()
}

pub fn run_scheme(cfg: &ScenarioConfig, scheme: Scheme, seed: u64) -> ExperimentResult {
    run_trial(cfg, &[scheme], "none", 0.0, 0, seed).remove(0)
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Power,
    Antennas,
    Users,
    Xi,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Power => "power",
            SweepAxis::Antennas => "antennas",
            SweepAxis::Users => "users",
            SweepAxis::Xi => "xi",
        }
    }

    /// Default grid for the axis.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Power => vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
            SweepAxis::Antennas => vec![4.0, 9.0, 16.0, 25.0, 36.0, 49.0],
            SweepAxis::Users => vec![2.0, 3.0, 4.0, 5.0, 6.0],
            SweepAxis::Xi => geometric_grid(FRAC_1_SQRT_2 / 10.0, FRAC_1_SQRT_2, 6),
        }
    }

    /// Config at one grid value.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidArgument(format!(
                    "{} value {v} is not a positive integer",
                    self.name()
                )))
            }
        };
        let out = match self {
            SweepAxis::Power => ScenarioConfig {
                tx_power_dbm: value,
                ..cfg.clone()
            },
            SweepAxis::Antennas => cfg.with_antennas(as_count(value)?)?,
            SweepAxis::Users => ScenarioConfig {
                users: as_count(value)?,
                ..cfg.clone()
            },
            SweepAxis::Xi => cfg.with_xi(value)?,
        };
        out.validate()?;
        Ok(out)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(SweepAxis::Power),
            "antennas" => Ok(SweepAxis::Antennas),
            "users" => Ok(SweepAxis::Users),
            "xi" => Ok(SweepAxis::Xi),
            other => Err(Error::InvalidArgument(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// `count` points from `lo` to `hi` with a constant ratio.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let r = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| lo * r.powi(i as i32)).collect()
}

/// Cross product value × trial × scheme, in that nesting order.
///
/// Trial seeds depend only on the master seed and trial index.
pub fn sweep(
    cfg: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    schemes: &[Scheme],
    exec: Execution,
) -> Result<Vec<ExperimentResult>> {
    let configs: Vec<(f64, ScenarioConfig)> = values
        .iter()
        .map(|&v| axis.apply(cfg, v).map(|c| (v, c)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|i| (0..cfg.trials).map(move |t| (i, t)))
        .collect();
    Ok(exec
        .map(jobs, |(i, t)| {
            let (v, c) = &configs[i];
            run_trial(c, schemes, axis.name(), *v, t, trial_seed(cfg.seed, t as u64))
        })
        .into_iter()
        .flatten()
        .collect())
}

/// Mean and standard error of the sum rate per (scheme, value) cell, over successful runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub scheme: Scheme,
    pub axis: String,
    pub value: f64,
    pub runs: usize,
    pub failures: usize,
    pub mean: f64,
    pub std_error: f64,
}

pub fn summarize(rows: &[ExperimentResult]) -> Vec<CellSummary> {
    let mut keys: Vec<(String, u64, Scheme)> = Vec::new();
    for r in rows {
        let k = (r.axis.clone(), r.value.to_bits(), r.scheme);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(axis, bits, scheme)| {
            let cell: Vec<&ExperimentResult> = rows
                .iter()
                .filter(|r| r.axis == axis && r.value.to_bits() == bits && r.scheme == scheme)
                .collect();
            let ok: Vec<f64> = cell.iter().filter(|r| r.is_ok()).map(|r| r.sum_rate).collect();
            let n = ok.len();
            let mean = if n > 0 {
                ok.iter().sum::<f64>() / n as f64
            } else {
                f64::NAN
            };
            let std_error = if n > 1 {
                (ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
            } else {
                0.0
            };
            CellSummary {
                scheme,
                axis,
                value: f64::from_bits(bits),
                runs: n,
                failures: cell.len() - n,
                mean,
                std_error,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            irs_side: 5,
            bs_cols: 2,
            bs_rows: 2,
            trials: 2,
            ao_max_iters: 4,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn fixed_scheme_stays_at_reference() {
        let r = run_scheme(&small(), Scheme::Fixed, 3);
        assert!(r.is_ok());
        assert_eq!((r.alpha, r.beta, r.phi, r.mean_elevation), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn identical_inputs_give_identical_rows() {
        let a = run_trial(&small(), &Scheme::ALL, "none", 0.0, 0, 9);
        let b = run_trial(&small(), &Scheme::ALL, "none", 0.0, 0, 9);
        assert_eq!(a, b);
        for r in &a {
            assert!(r.sum_rate >= r.initial_rate);
        }
        assert!(a[0].sum_rate >= a[3].sum_rate - 1e-9);
    }

    #[test]
    fn nested_runs_respect_inclusion_order() {
        for seed in 0..6 {
            let rows = run_trial(&small(), &Scheme::ALL, "none", 0.0, 0, seed);
            let r: Vec<f64> = rows.iter().map(|r| r.sum_rate).collect();
            assert!(r[0] >= r[1].max(r[2]) - 1e-12, "{r:?}");
            assert!(r[1].min(r[2]) >= r[3] - 1e-12, "{r:?}");
        }
        let cold = ScenarioConfig {
            nested_warm_start: false,
            ..small()
        };
        assert!(run_trial(&cold, &Scheme::ALL, "none", 0.0, 0, 2)
            .iter()
            .all(|r| r.start == "cold"));
        let dup = run_trial(&small(), &[Scheme::Dual, Scheme::Dual], "none", 0.0, 0, 2);
        assert!(dup[0].is_ok() && !dup[1].is_ok());
    }

    #[test]
    fn sweep_layout_and_summary() {
        let rows = sweep(
            &small(),
            SweepAxis::Power,
            &[0.0, 10.0],
            &[Scheme::Dual, Scheme::Fixed],
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(rows.len(), 2 * 2 * 2);
        assert_eq!(rows[0].value, 0.0);
        assert_eq!(rows[4].value, 10.0);
        let par = sweep(
            &small(),
            SweepAxis::Power,
            &[0.0, 10.0],
            &[Scheme::Dual, Scheme::Fixed],
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(rows, par);
        let s = summarize(&rows);
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|c| c.runs == 2 && c.failures == 0));
    }

    #[test]
    fn axis_application() {
        let c = SweepAxis::Antennas.apply(&ScenarioConfig::default(), 9.0).unwrap();
        assert_eq!((c.bs_cols, c.bs_rows), (3, 3));
        assert!(SweepAxis::Antennas.apply(&ScenarioConfig::default(), 10.0).is_err());
        assert!(SweepAxis::Users.apply(&ScenarioConfig::default(), 2.5).is_err());
        let c = SweepAxis::Xi.apply(&ScenarioConfig::default(), 0.2).unwrap();
        assert!((build_geometry(&c).unwrap().xi() - 0.2).abs() < 1e-12);
        let g = geometric_grid(0.1, 1.0, 3);
        assert!((g[1] - 0.1f64.sqrt()).abs() < 1e-15);
        assert_eq!("xi".parse::<SweepAxis>().unwrap(), SweepAxis::Xi);
    }
}
