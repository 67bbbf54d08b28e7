use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("disorder law rejected: {0}")]
    UnboundedLaw(String),
    #[error("need {needed} disorder values, got {got}")]
    InsufficientDisorder { needed: usize, got: usize },
    #[error("averaging window is empty (eps*N = {0} < 1)")]
    EmptyWindow(f64),
    #[error("rate function rejected at pair (k={k}, j={j}): {reason}")]
    RateFunction { k: usize, j: usize, reason: String },
    #[error("drift too large at site {site}: |q|/sqrt(N) = {value}")]
    DriftTooLarge { site: usize, value: f64 },
    #[error("fugacity solve failed: {0}")]
    Fugacity(String),
    #[error("state space too large: {size} > {budget}")]
    Budget { size: usize, budget: usize },
    #[error("eigensolver did not converge: {0}")]
    Eigen(String),
    #[error("pde solver aborted at step {step} (t = {t}): {reason}")]
    Pde { step: usize, t: f64, reason: String },
    #[error("environment out of (0,1) at site {site}: u = {u}")]
    EnvironmentRange { site: i64, u: f64 },
    #[error("window exhausted: {0}")]
    WindowExhausted(String),
    #[error("shooting failed: {0}")]
    Shooting(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}
