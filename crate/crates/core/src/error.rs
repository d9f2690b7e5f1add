use std::path::PathBuf;

use thiserror::Error;

use crate::time::YearMonth;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no observations")]
    NoObservations,

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("duplicate observation for unit '{unit}', date {date}, variable '{variable}'")]
    DuplicateObservation {
        unit: String,
        date: YearMonth,
        variable: String,
    },

    #[error("unit '{unit}' has a gap in its monthly series: {from} is followed by {to}")]
    MonthlyGap {
        unit: String,
        from: YearMonth,
        to: YearMonth,
    },

    #[error("unknown variable '{0}'")]
    UnknownVariable(String),

    #[error("unknown unit '{0}'")]
    UnknownUnit(String),

    #[error("variable '{0}' already exists")]
    DuplicateVariable(String),

    #[error("log of non-positive value {value} for unit '{unit}' at {date}")]
    NonPositiveLog {
        unit: String,
        date: YearMonth,
        value: f64,
    },

    #[error("balancing failed: {0}")]
    Balance(String),

    #[error("empty sector-month {0}")]
    EmptySectorMonth(YearMonth),

    #[error("constant series")]
    ConstantSeries,

    #[error("series too short: {len} observations, at least {required} required")]
    SeriesTooShort { len: usize, required: usize },

    #[error("unit '{unit}': {source}")]
    InUnit {
        unit: String,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient time depth: {0}")]
    InsufficientDepth(String),

    #[error("collinear regressors: {}", .0.join(", "))]
    Collinear(Vec<String>),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("covariance matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("did not converge after {iterations} iterations; theta trajectory: {trajectory}")]
    NonConvergence { iterations: usize, trajectory: String },

    #[error("no stable half-life for phi = {0}")]
    NoStableHalfLife(f64),

    #[error("unbalanced panel: {0}; run balance() first")]
    Unbalanced(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn in_unit(unit: &str, source: Error) -> Self {
        Error::InUnit {
            unit: unit.to_string(),
            source: Box::new(source),
        }
    }
}
