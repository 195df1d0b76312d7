use thiserror::Error;

pub type Result<T, E = EcmError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EcmError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    /// Price overflowed to a non-finite value while generating a path.
    #[error("path generation failed for simulation {sim} at step {step}")]
    PathOverflow { sim: u64, step: usize },

    #[error("no admissible allocation: feasible interval [{lo}, {hi}] is empty")]
    EmptyFeasibleInterval { lo: f64, hi: f64 },

    #[error("approximate Kelly fraction has a zero denominator (A = {a}, B = {b}, H2 = {h2}, H3 = {h3})")]
    DegenerateApprox { a: f64, b: f64, h2: f64, h3: f64 },

    #[error("horizon mismatch: {left} vs {right}")]
    HorizonMismatch { left: usize, right: usize },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl EcmError {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        EcmError::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        EcmError::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

impl From<std::io::Error> for EcmError {
    fn from(e: std::io::Error) -> Self {
        EcmError::Io(e.to_string())
    }
}
