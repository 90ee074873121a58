use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({u}, {v}) is outside the chart")]
    InvalidPoint { u: f64, v: f64 },

    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("domain has no interior nodes")]
    EmptyDomain,

    #[error("geometry overflow: {0}")]
    GeometryOverflow(String),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("pole ({u}, {v}) does not snap to an interior node")]
    InvalidPole { u: f64, v: f64 },

    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("start point ({u}, {v}) is outside the domain")]
    InvalidStart { u: f64, v: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors produced by the numerical solvers rather than by bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, Error::NoConvergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
