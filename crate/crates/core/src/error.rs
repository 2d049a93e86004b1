use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("label {label} at pixel ({row}, {col}) is outside 0..={max}")]
    LabelRange {
        row: usize,
        col: usize,
        label: u16,
        max: u16,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("class {0} has no ground-truth pixels")]
    EmptyClass(u16),

    #[error("{path}: invalid header: {reason}")]
    InvalidHeader { path: PathBuf, reason: String },

    #[error("{path}: truncated payload, expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("nu = {nu} is infeasible for class sizes {positives}/{negatives}")]
    InfeasibleNu {
        nu: f64,
        positives: usize,
        negatives: usize,
    },

    #[error("binary problem needs both classes, got {positives} positive and {negatives} negative")]
    SingleClass { positives: usize, negatives: usize },

    #[error("{solver} did not converge within {limit} {unit}")]
    NotConverged {
        solver: &'static str,
        limit: usize,
        unit: &'static str,
    },

    #[error("no feasible (nu, gamma) grid point")]
    NoFeasibleGridPoint,

    #[error("confusion matrix is empty")]
    EmptyConfusion,

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
