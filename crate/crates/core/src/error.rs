use thiserror::Error;

/// Errors produced by the cost model, the quadrature layer, the simulator and
/// the experiment front end.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A domain value violated its stated range.
    #[error("invalid {name}: {value} (expected {constraint})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// The re-scan recursion has no finite fixed point (precision ≤ α·recall).
    #[error("re-scan loop diverges: precision {precision} <= alpha {alpha} * recall {recall}")]
    DivergentLoop {
        alpha: f64,
        precision: f64,
        recall: f64,
    },

    /// The new/original cost ratio is 0/0 at a zero failure rate.
    #[error("cost ratio is undefined at alpha = 0")]
    UndefinedRatio,

    /// A row of a batch computation failed.
    #[error("row {index}: {source}")]
    Row {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// No false-positive rate in [0, 1] realizes the requested precision.
    #[error(
        "operating point (precision {precision}, recall {recall}) is infeasible at base rate {alpha}"
    )]
    InfeasibleOperatingPoint {
        alpha: f64,
        precision: f64,
        recall: f64,
    },

    /// The integrand pole at α = precision / recall touches the support.
    #[error("support upper bound {upper} reaches the cost-ratio pole at {pole}")]
    SupportViolation { upper: f64, pole: f64 },

    #[error("quadrature did not reach tolerance (estimate {estimate}, error {error_estimate})")]
    QuadratureFailure { estimate: f64, error_estimate: f64 },

    /// The operation needs an abstract-mode report.
    #[error("operation requires a {expected}-mode report, got {found}")]
    ModeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    /// Configuration error naming the offending key.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParameter { .. } => 2,
            Error::Io(_) => 4,
            Error::Row { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
