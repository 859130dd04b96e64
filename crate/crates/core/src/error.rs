use std::path::PathBuf;

use ces_milp::MilpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CesError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("feeder topology: {0}")]
    Topology(String),
    #[error("scenario reduction: {0}")]
    Reduction(String),
    #[error("stage {stage} is infeasible: {detail}")]
    Infeasible { stage: usize, detail: String },
    #[error("stage {stage} stopped at a solver limit without a feasible point")]
    Limit { stage: usize },
    #[error(transparent)]
    Solver(#[from] MilpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CesError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CesError {
    CesError::Validation(msg.into())
}
