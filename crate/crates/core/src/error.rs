use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular (zero pivot in column {column})")]
    SingularMatrix { column: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("iterative solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid node layout: {0}")]
    InvalidLayout(String),

    #[error("stencil needs {requested} nodes but only {available} are available")]
    TooFewNodes { requested: usize, available: usize },

    #[error("stencil around node {center} contains coincident nodes")]
    DegenerateStencil { center: usize },

    #[error("boundary operator not supported: {0}")]
    UnsupportedBoundaryOperator(String),

    #[error("inconsistent local data layout: {0}")]
    InconsistentLayout(String),

    #[error("state value missing at node {node}")]
    MissingStateValue { node: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
