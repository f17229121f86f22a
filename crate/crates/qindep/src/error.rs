use thiserror::Error;

/// Errors produced by curve algebra, constructions, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of range: {0}")]
    OutOfRange(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("marginal inconsistency: {0}")]
    Inconsistent(String),
    #[error("infeasible program: {0}")]
    Infeasible(String),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
