use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GameError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("payoff entry {value} at ({row}, {col}) is outside [-1, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("zero-sum violation at ({row}, {col}): r1 + r2^T = {residual:e}")]
    ZeroSumViolation { row: usize, col: usize, residual: f64 },
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid temperature {0}: must be finite and at least 1e-8")]
    InvalidTemperature(f64),
    #[error("invalid stepsize: {0}")]
    InvalidStepsize(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("integer overflow computing {0}")]
    Overflow(&'static str),
    #[error("no admissible r in (0, 0.5): {0}")]
    NoAdmissibleR(String),
    #[error("drift inequality violated at k = {k}: slack {slack:e}")]
    DriftViolation { k: u64, slack: f64 },
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("fixed-point iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: u64, residual: f64 },
    #[error("game file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GameError>;
