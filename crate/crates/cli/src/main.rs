//! Command-line driver for the dual-rotation experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualrot::analysis::{
    alignment_check, decompose_sweep, power_bound_check, separability_check, summarize_decomposition, DEFAULT_RESTARTS,
};
use dualrot::geometry::EulerOrientation;
use dualrot::harness::{
    emit_csv, emit_decomposition_csv, fmt_f64, load_config, run_schemes, sibling_path, summarize, sweep, write_table,
    Execution, ScenarioConfig, SweepAxis,
};
use dualrot::mu_solver::Scheme;
use dualrot::Error;

#[derive(Parser, Debug)]
#[command(name = "dualrot", version, about = "Dual-rotation IRS-assisted uplink experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Converged sum rate and per-iteration traces of each scheme at the configured point.
    Converge(Common),
    /// Sum rate of each scheme along one parameter axis.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values; defaults to the axis grid.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Single-user near-field gain decomposition along the aperture-to-distance ratio.
    Decompose {
        /// Comma-separated ratios; defaults to six geometric points in [0.0707, 0.7071] (the `xi` sweep grid).
        #[arg(long, value_delimiter = ',')]
        xis: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Numerical checks of the separability, power-bound and alignment properties.
    Props(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key = value config file; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config override `key=value`, applied after the file; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Results CSV; sibling `_traces` and `_summary` files are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Schemes to run, comma-separated (dual, bs-only, irs-only, fixed); defaults to all.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<Scheme>,
    /// Run jobs one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn config(&self) -> dualrot::Result<ScenarioConfig> {
        let mut cfg = load_config(self.config.as_deref())?;
        for kv in &self.overrides {
            let (key, value) = kv.split_once('=').ok_or_else(|| Error::InvalidConfig {
                field: kv.clone(),
                reason: "expected KEY=VALUE".into(),
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn schemes(&self) -> Vec<Scheme> {
        if self.scheme.is_empty() {
            Scheme::ALL.to_vec()
        } else {
            self.scheme.clone()
        }
    }

    fn out(&self, default: &str) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("results").join(default))
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn report_paths(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn converge(common: &Common) -> anyhow::Result<()> {
    let cfg = common.config()?;
    let rows = run_schemes(&cfg, &common.schemes(), common.execution());
    let cells = summarize(&rows);
    for c in &cells {
        println!(
            "{:<9} mean {:>8.4} bps/Hz  se {:.4}  runs {}  failures {}",
            c.scheme, c.mean, c.std_error, c.runs, c.failures
        );
    }
    report_paths(&emit_csv(&common.out("converge.csv"), &rows, &cells)?);
    Ok(())
}

fn run_sweep(axis: SweepAxis, values: &[f64], common: &Common) -> anyhow::Result<()> {
    let cfg = common.config()?;
    let values = if values.is_empty() {
        axis.default_values()
    } else {
        values.to_vec()
    };
    let rows = sweep(&cfg, axis, &values, &common.schemes(), common.execution())?;
    let cells = summarize(&rows);
    for c in &cells {
        println!(
            "{:<9} {}={:<8} mean {:>8.4}  se {:.4}  failures {}",
            c.scheme, c.axis, c.value, c.mean, c.std_error, c.failures
        );
    }
    report_paths(&emit_csv(&common.out(&format!("sweep_{axis}.csv")), &rows, &cells)?);
    Ok(())
}

fn decompose(xis: &[f64], common: &Common) -> anyhow::Result<()> {
    let cfg = common.config()?;
    let xis = if xis.is_empty() {
        SweepAxis::Xi.default_values()
    } else {
        xis.to_vec()
    };
    let rows = decompose_sweep(&cfg, &xis, common.execution())?;
    for s in summarize_decomposition(&rows) {
        println!(
            "xi {:.4}  runs {}  G_p {:.4}  G_beta {:.4}  eta_dual {:.4}  beta_dual {:.4}  beta_fix {:.4}",
            s.xi, s.runs, s.power_gain, s.efficiency_gain, s.eta_dual, s.beta_dual, s.beta_fixed
        );
    }
    report_paths(&emit_decomposition_csv(&common.out("decompose.csv"), &rows)?);
    Ok(())
}

struct Check {
    name: &'static str,
    value: f64,
    bound: f64,
    pass: bool,
}

fn props(common: &Common) -> anyhow::Result<()> {
    let cfg = common.config()?;
    let sep = separability_check(&cfg, 100, cfg.seed)?;
    let bounds = power_bound_check(&cfg, &[3, 7, 21], 50, 1000, DEFAULT_RESTARTS, cfg.seed)?;
    let xis = SweepAxis::Xi.default_values();
    let align = alignment_check(
        &cfg,
        200,
        (0.05, 0.7),
        &xis,
        EulerOrientation::new(0.3, 0.2, -0.2),
        cfg.seed,
    )?;
    let checks = [
        Check {
            name: "ff_separability_residual",
            value: sep.max_residual,
            bound: 1e-9,
            pass: sep.max_residual < 1e-9,
        },
        Check {
            name: "ff_beta_deviation",
            value: sep.max_beta_deviation,
            bound: 1e-12,
            pass: sep.max_beta_deviation <= 1e-12,
        },
        Check {
            name: "nf_random_power_over_upper_bound",
            value: bounds.max_upper_ratio,
            bound: 1.0,
            pass: bounds.max_upper_ratio <= 1.0 + 1e-12,
        },
        Check {
            name: "nf_optimized_power_over_lower_bound",
            value: bounds.min_lower_ratio,
            bound: 1.0,
            pass: bounds.min_lower_ratio >= 1.0,
        },
        Check {
            name: "gain_mean_bound_violations",
            value: align.mean_bound_violations as f64,
            bound: 0.0,
            pass: align.mean_bound_violations == 0,
        },
        Check {
            name: "gain_spread_bound_violations",
            value: align.spread_bound_violations as f64,
            bound: 0.0,
            pass: align.spread_bound_violations == 0,
        },
        Check {
            name: "delta_over_xi_ratio",
            value: align.slope_ratio(),
            bound: 2.0,
            pass: align.slope_ratio() <= 2.0,
        },
    ];
    for c in &checks {
        println!(
            "{} {:<38} {:.6e} (bound {:e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.bound
        );
    }
    let out = common.out("props.csv");
    write_table(
        &out,
        &["check", "value", "bound", "pass"],
        checks.iter().map(|c| {
            vec![
                c.name.to_string(),
                fmt_f64(c.value),
                fmt_f64(c.bound),
                c.pass.to_string(),
            ]
        }),
    )?;
    let sweep_path = sibling_path(&out, "delta_sweep");
    write_table(
        &sweep_path,
        &["xi", "delta"],
        align.sweep.iter().map(|(x, d)| vec![fmt_f64(*x), fmt_f64(*d)]),
    )?;
    report_paths(&[out, sweep_path]);
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidConfig { .. }) => 2,
        Some(Error::Io { .. } | Error::Csv { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Converge(c) => converge(c),
        Command::Sweep { axis, values, common } => run_sweep(*axis, values, common),
        Command::Decompose { xis, common } => decompose(xis, common),
        Command::Props(c) => props(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {} failed: {e}", command_name(&cli.command));
            ExitCode::from(exit_code(&e))
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Converge(_) => "converge",
        Command::Sweep { .. } => "sweep",
        Command::Decompose { .. } => "decompose",
        Command::Props(_) => "props",
    }
}
