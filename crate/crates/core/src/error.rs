use thiserror::Error;

/// Errors raised by model construction, sampling and the diagnostics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("initial phase vector is not a probability vector: {0}")]
    NonStochastic(String),
    #[error("invalid routing matrix: {0}")]
    BadRouting(String),
    #[error("matrix is singular: {0}")]
    Singular(String),
    #[error("invalid service rates: {0}")]
    BadRates(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("index {index} out of range 1..={dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("series too short: length {len}, need more than {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("lyapunov inequality 2 violated: largest eigenvalue {max_eigenvalue:e}")]
    Inequality2Violated { max_eigenvalue: f64 },
    #[error("matrix is not Hurwitz: {0}")]
    NotHurwitz(String),
    #[error("no valid drift constants: {0}")]
    NoValidConstants(String),
    #[error("time step too coarse: eta {eta} > eps_min/10 = {limit}")]
    ResolutionTooCoarse { eta: f64, limit: f64 },
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to rejected inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NoValidConstants(_)
                | Error::Inequality2Violated { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
