use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("point outside the open domain: {0}")]
    Domain(String),
    #[error("linear system is singular at pivot {0}")]
    Singular(usize),
    #[error("elliptic solve did not converge: residual history {0:?}")]
    NotConverged(Vec<f64>),
    #[error("non-finite norm contribution in term {0}")]
    NonFinite(usize),
    #[error("time step rejected: {0}")]
    Step(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
