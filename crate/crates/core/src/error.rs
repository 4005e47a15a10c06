use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("time {t} outside the evaluable range [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("metric is not symmetric positive definite")]
    MetricNotSpd,

    #[error("delay value {value} at t = {t} violates declared bounds [{lower}, {upper}]")]
    DelayOutOfBounds { t: f64, value: f64, lower: f64, upper: f64 },

    #[error("generator not exponentially stable (spectral abscissa {abscissa})")]
    NotExponentiallyStable { abscissa: f64 },

    #[error("certificate estimation failed: {0}")]
    Estimation(String),

    #[error("precondition unmet: {0}")]
    Precondition(String),

    #[error("no contraction window starting at t = {start}: factor {factor} over [{start}, {end}] exceeds budget {budget}")]
    Window { start: f64, end: f64, factor: f64, budget: f64 },

    #[error("fixed-point iteration on [{start}, {end}] did not converge after {iterations} iterations (last change {last_change:e})")]
    Convergence { start: f64, end: f64, iterations: usize, last_change: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("solution diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
