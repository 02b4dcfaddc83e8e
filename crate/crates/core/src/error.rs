use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Invalid user input (grid sizes, fields, configuration values).
    #[error("validation error: {0}")]
    Validation(String),

    /// Array shapes that do not match the grid or each other.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A direction or operation touched a parameter component that is not active.
    #[error("parameter component `{0}` is not active")]
    InactiveComponent(&'static str),

    /// Diffusion coefficient at or below its lower bound.
    #[error("diffusion coefficient {value} at node {node} violates lower bound {bound}")]
    Coefficient { node: usize, value: f64, bound: f64 },

    /// Newton failed inside an implicit time step.
    #[error("Newton did not converge at time step {step} (residual {residual:.3e} after {iterations} iterations)")]
    Newton { step: usize, residual: f64, iterations: usize },

    /// An iterative linear solve hit its iteration cap.
    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:.3e})")]
    Cg { iterations: usize, residual: f64 },

    /// The lower-level iteration produced a non-finite value or blew up.
    #[error("lower-level iteration diverged at step {step}: {reason}")]
    LowerDivergence { step: usize, reason: String },

    /// Lower-level failure seen from the upper-level loop.
    #[error("upper iteration {j}: {source}")]
    Upper { j: usize, source: Box<Error> },

    /// The stopping-constant denominator is not positive.
    #[error("stopping constant infeasible: {0}")]
    Infeasible(String),

    /// Diagnostic input too short or otherwise unusable.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
