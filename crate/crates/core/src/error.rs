use thiserror::Error;

/// Errors produced by the simulation, control and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid control: {0}")]
    InvalidControl(String),

    #[error("time {t} ns outside [0, {total}] ns")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("target is not unitary (deviation {0:.3e})")]
    NonUnitaryTarget(f64),

    #[error("input matrix is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),

    #[error("decomposition did not reach tolerance: residual {residual:.3e} after {attempts} attempts")]
    DecompositionFailed { residual: f64, attempts: usize },

    #[error("Lie closure truncated at dimension {0} before a decision")]
    Indeterminate(usize),

    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
