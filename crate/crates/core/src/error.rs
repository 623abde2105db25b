use thiserror::Error;

use crate::model::State;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state {state} is outside the state space (inventory must be at most {b})")]
    InvalidState { state: State, b: u32 },

    #[error("truncated state space has {requested} states, limit is {limit}")]
    Capacity { requested: u128, limit: usize },

    #[error("generator is not irreducible on the class reachable from the full-stock state: {0}")]
    Structural(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e}, target {tolerance:e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("drift certificate inapplicable: eta = mu - lambda1 - lambda2 = {eta} is not positive")]
    CertificateInapplicable { eta: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("conditioning event `{0}` has zero probability")]
    ZeroConditioningMass(&'static str),

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing key `{0}`")]
    MissingKey(String),

    #[error("parse error: {0}")]
    Parse(String),

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
        if e.is_io_error() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
