//! Configuration, Monte Carlo driver, sweeps and CSV output.

pub mod config;
pub mod csv;
pub mod experiment;
pub mod parallel;

pub use config::{build_geometry, dbm_to_watts, load_config, ScenarioConfig};
pub use csv::{emit_csv, emit_decomposition_csv, fmt_f64, sibling_path, write_table};
pub use experiment::{
    ao_controls, geometric_grid, run_scheme, run_schemes, run_trial, solve_schemes, sub_schemes, summarize, sweep,
    CellSummary, ExperimentResult, SchemeSolution, SweepAxis,
};
pub use parallel::Execution;
