use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("pair (A, B) is not stabilizable")]
    NotStabilizable,

    #[error("pair (A, Q^1/2) is not detectable")]
    NotDetectable,

    #[error("Riccati residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    IllConditioned { residual: f64, tolerance: f64 },

    #[error("steady state undefined: {0}")]
    SteadyStateUndefined(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate policy: {0}")]
    DegeneratePolicy(String),

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("transport problem infeasible: {0}")]
    Infeasible(String),

    #[error("cost matrix is {rows}x{cols}, expected square")]
    NonSquare { rows: usize, cols: usize },

    #[error("tracker synthesis failed for agent {agent}, target {target}: {source}")]
    PairSynthesis {
        agent: usize,
        target: usize,
        source: Box<Error>,
    },

    #[error("i/o: {0}")]
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
