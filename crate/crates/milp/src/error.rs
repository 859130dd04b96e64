use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),
    #[error("column `{name}` has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("row `{row}` references undefined column {column} or a non-finite value")]
    BadRow { row: String, column: usize },
    #[error("simplex failed to converge: {0}")]
    Numeric(String),
    #[error("MPS parse error at line {line}: {msg}")]
    MpsParse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
