//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("correlation matrix not positive definite at theta = {theta:?} (jitter exhausted at {max_jitter:.3e})")]
    NotPositiveDefinite { theta: Vec<f64>, max_jitter: f64 },
    #[error("under-determined trend: {0}")]
    UnderDeterminedTrend(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate validation set: {0}")]
    DegenerateValidation(String),
    #[error("constant input dimension {0} (max equals min)")]
    ConstantInput(usize),
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("objective returned the infeasible sentinel at every probed point")]
    AllInfeasible,
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("no successful model among sweep results")]
    NoModel,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
