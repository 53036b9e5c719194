use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("asset {asset} has zero realized volatility; Sharpe ratio undefined")]
    ZeroVolatility { asset: usize },

    #[error("degenerate Sharpe range: all assets have Sharpe {0}")]
    DegenerateRange(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("problem of size {n} exceeds the limit of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("invalid qubit id {0}")]
    InvalidDefectId(usize),

    #[error("clique layout for n={n} hits defective qubit {qubit}")]
    InfeasibleWithDefects { n: usize, qubit: usize },

    #[error("no coupler available between logical variables {0} and {1}")]
    MissingCoupler(usize, usize),

    #[error("malformed schedule: {0}")]
    MalformedSchedule(String),

    #[error("invalid fraction {name}={value}; must lie in [0, 1]")]
    InvalidFraction { name: &'static str, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("reverse annealing requires an initial state")]
    MissingInitialState,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("time-to-solution undefined: no successful reads")]
    UndefinedTts,

    #[error("malformed instance file: {0}")]
    MalformedInstance(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::ZeroVolatility { .. } => "zero_volatility",
            Error::DegenerateRange(_) => "degenerate_range",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::TooLarge { .. } => "too_large",
            Error::InvalidDefectId(_) => "invalid_defect_id",
            Error::InfeasibleWithDefects { .. } => "infeasible_with_defects",
            Error::MissingCoupler(..) => "missing_coupler",
            Error::MalformedSchedule(_) => "malformed_schedule",
            Error::InvalidFraction { .. } => "invalid_fraction",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::MissingInitialState => "missing_initial_state",
            Error::InvalidConfig(_) => "invalid_config",
            Error::UndefinedTts => "undefined_tts",
            Error::MalformedInstance(_) => "malformed_instance",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
