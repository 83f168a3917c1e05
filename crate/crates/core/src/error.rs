use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unit index {index} out of range for {n} units")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid treatment entry {value} at position {index} (must be 0 or 1)")]
    InvalidTreatment { index: usize, value: u8 },

    #[error("probability {value} at unit {index} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange { index: usize, value: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("support of {size} assignments exceeds the enumeration limit of {limit}")]
    SupportTooLarge { size: f64, limit: f64 },

    #[error("method not applicable: {0}")]
    Infeasible(String),

    #[error("{0} requires a Bernoulli design")]
    NonBernoulliDesign(&'static str),

    #[error("unit {index} has degenerate treatment probability {probability}")]
    DegenerateProbability { index: usize, probability: f64 },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
