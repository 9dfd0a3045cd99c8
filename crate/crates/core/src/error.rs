use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has non-finite value at node {node}")]
    NonFinite { node: usize },
    #[error("field length {got} does not match grid with {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("quadratic has no real root; shrink ε or mollify_radius (discriminant {0:e})")]
    NoRealRoot(f64),
    #[error("initial-data constant C = {0:e} is not positive")]
    NonPositiveC(f64),
    #[error("{0}")]
    Diagnostic(String),
    #[error("step budget of {0} steps exhausted before t_end")]
    StepBudget(usize),
    #[error("config line {line}: key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },
    #[error("dt too large: simplex clip {0:e} exceeds 1e-6")]
    SimplexClip(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
