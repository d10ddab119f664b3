use thiserror::Error;

use crate::labels::PhaseLabel;
use crate::hamiltonians::Model;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state length mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("site {site} outside 1..={site_count}")]
    SiteOutOfRange { site: usize, site_count: usize },

    #[error("two-site operator needs distinct sites, got {0} twice")]
    EqualSites(usize),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid solver config: {0}")]
    InvalidConfig(String),

    #[error("lanczos did not converge after {iterations} iterations (best residual {best_residual:.3e})")]
    NotConverged { iterations: usize, best_residual: f64 },

    #[error("dense solver limited to 3^N <= 1000, got N = {0}")]
    TooLargeForDense(usize),

    #[error("correlation index {index} outside 1..={max}")]
    CorrelationIndex { index: usize, max: usize },

    #[error("observable expectation has imaginary residue {0:.3e}")]
    NotReal(f64),

    #[error("feature vector norm {0:.3e} too small for spatial sign")]
    ZeroNorm(f64),

    #[error("no label for point {0}")]
    Unlabeled(String),

    #[error("phase {label} does not occur in model {model}")]
    IncompatiblePhase { model: Model, label: PhaseLabel },

    #[error("unknown phase label {0:?}")]
    UnknownLabel(String),

    #[error("invalid k = {k} for {rows} training rows")]
    InvalidK { k: usize, rows: usize },

    #[error("training set is empty")]
    EmptyTraining,

    #[error("training row {0} carries no label")]
    UnlabeledTrainingRow(usize),

    #[error("no test rows left after removing untrainable phases")]
    EmptyTestSet,

    #[error("{failed} of {total} grid points failed (budget 1%)")]
    FailureBudget { failed: usize, total: usize },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
