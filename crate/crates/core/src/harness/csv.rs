//! CSV output with a fixed column order and round-trip float formatting.

use std::path::{Path, PathBuf};

use crate::analysis::DecompositionRow;
use crate::error::{Error, Result};
use crate::harness::experiment::{CellSummary, ExperimentResult};

pub const RESULT_COLUMNS: [&str; 20] = [
    "scheme",
    "axis",
    "value",
    "trial",
    "seed",
    "status",
    "start",
    "initial_rate",
    "sum_rate",
    "iterations",
    "converged",
    "xi",
    "alpha",
    "beta",
    "phi",
    "mean_elevation",
    "fp_rejections",
    "rho_mean",
    "delta",
    "gain_variance",
];

pub const TRACE_COLUMNS: [&str; 7] = ["scheme", "axis", "value", "trial", "seed", "iteration", "sum_rate"];

pub const SUMMARY_COLUMNS: [&str; 7] = ["scheme", "axis", "value", "runs", "failures", "mean", "std_error"];

pub const DECOMPOSITION_COLUMNS: [&str; 14] = [
    "xi",
    "trial",
    "seed",
    "status",
    "power_gain",
    "efficiency_gain",
    "eta_dual",
    "eta_bs",
    "eta_irs",
    "beta_dual",
    "beta_fixed",
    "rho_mean",
    "delta",
    "gain_variance",
];

pub const DECOMPOSITION_TRACE_COLUMNS: [&str; 5] = ["xi", "trial", "seed", "iteration", "power"];

/// Float at 17 significant digits; parsing the text recovers the same bits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// `dir/name.csv` → `dir/name_<suffix>.csv`.
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

/// Writes a header and rows, creating parent directories as needed.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn result_record(r: &ExperimentResult) -> Vec<String> {
    vec![
        r.scheme.to_string(),
        r.axis.clone(),
        fmt_f64(r.value),
        r.trial.to_string(),
        r.seed.to_string(),
        r.status.clone(),
        r.start.clone(),
        fmt_f64(r.initial_rate),
        fmt_f64(r.sum_rate),
        r.iterations.to_string(),
        r.converged.to_string(),
        fmt_f64(r.xi),
        fmt_f64(r.alpha),
        fmt_f64(r.beta),
        fmt_f64(r.phi),
        fmt_f64(r.mean_elevation),
        r.fp_rejections.to_string(),
        fmt_f64(r.rho_mean),
        fmt_f64(r.delta),
        fmt_f64(r.gain_variance),
    ]
}

pub fn write_results(path: &Path, rows: &[ExperimentResult]) -> Result<()> {
    write_table(path, &RESULT_COLUMNS, rows.iter().map(result_record))
}

/// Long format: one row per (run, iteration), iteration 0 being the initial rate.
pub fn write_traces(path: &Path, rows: &[ExperimentResult]) -> Result<()> {
    let records = rows.iter().flat_map(|r| {
        r.trace.iter().enumerate().map(move |(i, rate)| {
            vec![
                r.scheme.to_string(),
                r.axis.clone(),
                fmt_f64(r.value),
                r.trial.to_string(),
                r.seed.to_string(),
                i.to_string(),
                fmt_f64(*rate),
            ]
        })
    });
    write_table(path, &TRACE_COLUMNS, records)
}

pub fn write_summary(path: &Path, cells: &[CellSummary]) -> Result<()> {
    write_table(
        path,
        &SUMMARY_COLUMNS,
        cells.iter().map(|c| {
            vec![
                c.scheme.to_string(),
                c.axis.clone(),
                fmt_f64(c.value),
                c.runs.to_string(),
                c.failures.to_string(),
                fmt_f64(c.mean),
                fmt_f64(c.std_error),
            ]
        }),
    )
}

/// Results at `path`, traces and per-cell summary at sibling paths; returns all three paths.
pub fn emit_csv(path: &Path, rows: &[ExperimentResult], cells: &[CellSummary]) -> Result<[PathBuf; 3]> {
    let traces = sibling_path(path, "traces");
    let summary = sibling_path(path, "summary");
    write_results(path, rows)?;
    write_traces(&traces, rows)?;
    write_summary(&summary, cells)?;
    Ok([path.to_path_buf(), traces, summary])
}

fn decomposition_record(r: &DecompositionRow) -> Vec<String> {
    let align = |f: fn(&crate::analysis::AlignmentStats) -> f64| fmt_f64(r.alignment.as_ref().map_or(f64::NAN, f));
    vec![
        fmt_f64(r.xi),
        r.trial.to_string(),
        r.seed.to_string(),
        r.status.clone(),
        fmt_f64(r.power_gain),
        fmt_f64(r.efficiency_gain),
        fmt_f64(r.eta_dual),
        fmt_f64(r.eta_bs),
        fmt_f64(r.eta_irs),
        fmt_f64(r.beta_dual),
        fmt_f64(r.beta_fixed),
        align(|a| a.rho_mean),
        align(|a| a.delta),
        align(|a| a.gain_variance),
    ]
}

/// Decomposition rows at `path` and the per-iteration powers of each dual run at the `traces` sibling.
pub fn emit_decomposition_csv(path: &Path, rows: &[DecompositionRow]) -> Result<[PathBuf; 2]> {
    let traces = sibling_path(path, "traces");
    write_table(path, &DECOMPOSITION_COLUMNS, rows.iter().map(decomposition_record))?;
    let records = rows.iter().flat_map(|r| {
        r.trace.iter().enumerate().map(move |(i, p)| {
            vec![
                fmt_f64(r.xi),
                r.trial.to_string(),
                r.seed.to_string(),
                i.to_string(),
                fmt_f64(*p),
            ]
        })
    });
    write_table(&traces, &DECOMPOSITION_TRACE_COLUMNS, records)?;
    Ok([path.to_path_buf(), traces])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ScenarioConfig;
    use crate::harness::experiment::{run_trial, summarize};
    use crate::mu_solver::Scheme;
    use proptest::prelude::*;

    fn rows() -> Vec<ExperimentResult> {
        let cfg = ScenarioConfig {
            irs_side: 3,
            bs_cols: 2,
            bs_rows: 1,
            users: 2,
            ao_max_iters: 3,
            ..ScenarioConfig::default()
        };
        run_trial(&cfg, &[Scheme::Dual, Scheme::Fixed], "none", 0.0, 0, 4)
    }

    fn read(path: &Path) -> Vec<csv::StringRecord> {
        csv::Reader::from_path(path)
            .unwrap()
            .records()
            .map(|r| r.unwrap())
            .collect()
    }

    #[test]
    fn zero_rows_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.csv");
        write_results(&p, &[]).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap().trim_end(),
            RESULT_COLUMNS.join(",")
        );
    }

    #[test]
    fn results_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rows = rows();
        write_results(&p, &rows).unwrap();
        let back = read(&p);
        assert_eq!(back.len(), rows.len());
        for (rec, r) in back.iter().zip(&rows) {
            assert_eq!(rec[8].parse::<f64>().unwrap().to_bits(), r.sum_rate.to_bits());
            assert_eq!(rec[7].parse::<f64>().unwrap().to_bits(), r.initial_rate.to_bits());
            assert_eq!(&rec[0], r.scheme.name());
        }
    }

    #[test]
    fn trace_file_is_long_format() {
        let dir = tempfile::tempdir().unwrap();
        let rows = rows();
        let [_, traces, summary] = emit_csv(&dir.path().join("out/r.csv"), &rows, &summarize(&rows)).unwrap();
        assert!(traces.ends_with("r_traces.csv"));
        let back = read(&traces);
        assert_eq!(back.len(), rows.iter().map(|r| r.trace.len()).sum::<usize>());
        assert_eq!(&back[0][5], "0");
        assert_eq!(read(&summary).len(), 2);
    }

    #[test]
    fn unwritable_path_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = write_results(&blocker.join("r.csv"), &[]).unwrap_err();
        assert!(err.to_string().contains("file"));
    }

    proptest! {
        #[test]
        fn float_format_round_trips(x in any::<f64>()) {
            let back: f64 = fmt_f64(x).parse().unwrap();
            if x.is_nan() {
                prop_assert!(back.is_nan());
            } else {
                prop_assert_eq!(back.to_bits(), x.to_bits());
            }
        }
    }
}
