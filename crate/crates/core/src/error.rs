use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the filtering, theory and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("input source exhausted after {produced} of {requested} samples")]
    InputExhausted { produced: usize, requested: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid GGD shape {0}: must be > 0")]
    InvalidShape(f64),

    #[error("invalid probability {0}: must lie in [0, 1]")]
    InvalidProbability(f64),

    #[error("unknown noise case {0}: expected 1..=5")]
    InvalidCase(u8),

    #[error("censoring ratio {0} >= 1 gives a divergent threshold")]
    DivergentThreshold(f64),

    #[error("invalid censoring ratio {0}: must be >= 0")]
    InvalidRatio(f64),

    #[error("non-finite value at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: String },

    #[error("reuse requested at i = {i} but updates only start after L = {order}")]
    TooEarly { i: usize, order: usize },

    #[error("history gap: index {index} not retained (available {first}..={last})")]
    HistoryGap { index: usize, first: usize, last: usize },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("stability indeterminate: step-bound denominator {0} is not positive")]
    StabilityIndeterminate(f64),

    #[error("divergent regime: spectral radius of F is {0} >= 1")]
    DivergentRegime(f64),

    #[error("undefined reference: true weight vector has zero norm at iteration {0}")]
    UndefinedReference(usize),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("parse error in {path} line {line}: cannot read {token:?} as a number")]
    Parse {
        path: PathBuf,
        line: usize,
        token: String,
    },

    #[error("unsupported audio format in {path}: {field} = {value}")]
    UnsupportedFormat {
        path: PathBuf,
        field: &'static str,
        value: String,
    },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("run {run} failed: {source}")]
    RunFailed {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
