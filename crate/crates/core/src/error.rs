use thiserror::Error;

/// Errors raised by simulation, extraction and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("integration became unstable at t = {time}")]
    Instability { time: f64 },

    #[error("no oscillation detected on oscillator {oscillator}")]
    NoOscillation { oscillator: usize },

    #[error("adjoint integration did not converge (periodicity residual {residual:.3e} of peak)")]
    NonConvergence { residual: f64 },

    #[error("pulse probe failed at phase {phase}: {reason}")]
    ProbeFailure { phase: f64, reason: String },

    #[error("sweep failed: {invalid} of {total} cells invalid")]
    SweepFailed { invalid: usize, total: usize },

    #[error("benchmark invalid: {0}")]
    BenchmarkInvalid(String),

    #[error("bad data in field `{field}`: {message}")]
    Format { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Broad failure class, used for exit codes and machine-readable error records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Domain(_) | Error::Config(_) | Error::Contract(_) | Error::Unsupported(_) => {
                ErrorClass::Usage
            }
            Error::Format { .. } | Error::Io(_) | Error::Json(_) | Error::Csv(_) => ErrorClass::Data,
            Error::Instability { .. }
            | Error::NoOscillation { .. }
            | Error::NonConvergence { .. }
            | Error::ProbeFailure { .. }
            | Error::SweepFailed { .. }
            | Error::BenchmarkInvalid(_) => ErrorClass::Numerical,
        }
    }

    /// Short stable identifier for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Contract(_) => "contract",
            Error::Unsupported(_) => "unsupported",
            Error::Instability { .. } => "instability",
            Error::NoOscillation { .. } => "no_oscillation",
            Error::NonConvergence { .. } => "non_convergence",
            Error::ProbeFailure { .. } => "probe_failure",
            Error::SweepFailed { .. } => "sweep_failed",
            Error::BenchmarkInvalid(_) => "benchmark_invalid",
            Error::Format { .. } => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
