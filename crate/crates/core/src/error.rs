use std::path::PathBuf;

/// Errors raised by the simulator and solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// The IRS normal does not face the BS half-space.
    #[error("infeasible IRS orientation: visibility margin {margin:.3e} < 0")]
    InfeasibleOrientation { margin: f64 },

    /// A boresight lies outside the elevation cap and must be projected first.
    #[error("boresight outside elevation cap (cos to reference {cos:.6}, limit {limit:.6})")]
    OutsideCap { cos: f64, limit: f64 },

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// Retraction hit an entry with |v_n + t_n| ~ 0.
    #[error("retraction step rejected at element {index}")]
    StepRejected { index: usize },

    #[error("zero baseline power; rotation gain undefined")]
    UndefinedGain,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
