//! Error type shared across the toolkit.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("invalid class id {value} at pixel ({row},{col})")]
    InvalidClassId { value: u8, row: usize, col: usize },

    #[error("probability sum {sum} at pixel ({row},{col}) outside [1-eps, 1+eps]")]
    ProbabilitySum { sum: f64, row: usize, col: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },

    #[error("duplicate id {id}")]
    DuplicateId { id: String },

    #[error("manifest parse error at line {line}: {reason}")]
    ManifestParse { line: usize, reason: String },

    #[error("missing file reference for record {id}: {field}")]
    MissingFileRef { id: String, field: &'static str },

    #[error("infeasible split: group {group} needs {requested} but only {available} available")]
    InfeasibleSplit {
        group: usize,
        requested: usize,
        available: usize,
    },

    #[error("fewer than 10 scorable images ({n})")]
    TooFewImages { n: usize },

    #[error("ground-truth label map required for gt-fg pixel set")]
    MissingGroundTruth,

    #[error("degenerate input for PCA: {0}")]
    DegeneratePca(String),

    #[error("single-class split: probe requires both classes present")]
    SingleClassSplit,

    #[error("metric-set mismatch: {0}")]
    MetricSetMismatch(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
