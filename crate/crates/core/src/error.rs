use thiserror::Error;

/// Errors raised by the numerical and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trait dimension {found} not supported here (expected {expected})")]
    Dimension { expected: usize, found: usize },

    #[error("trait {trait_value:?} is not viable (net reproduction rate {r0:.6} <= 1)")]
    NotViable { trait_value: Vec<f64>, r0: f64 },

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("quadrature tail not converged: {0}")]
    Tail(String),

    #[error("nonfinite rate encountered: {0}")]
    NonFinite(String),

    #[error("population explosion: {count} individuals exceeds cap {cap} at t = {time:.4}")]
    Explosion { count: usize, cap: usize, time: f64 },

    #[error("numerical scheme failure: {0}")]
    Scheme(String),

    #[error("contour failure: {0}")]
    Contour(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("assertion failed: {0}")]
    Assertion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
