//! Crate-wide error type.

use num_complex::Complex64;
use thiserror::Error;

/// Everything that can go wrong across the sampling / theory / comparison
/// pipelines. Numeric failures carry enough context to reproduce the call.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("unknown atom family kind `{0}`")]
    UnknownAtomKind(String),

    #[error("allocation of {bytes} bytes failed for n = {n}")]
    Allocation { n: usize, bytes: usize },

    #[error("eigensolver backend failed ({context}): {source}")]
    Backend {
        context: String,
        #[source]
        source: ndarray_linalg::error::LinalgError,
    },

    #[error("fixed point did not converge at eta = {eta} (residual {residual:.3e} after {iterations} iterations)")]
    NonConvergence {
        eta: Complex64,
        residual: f64,
        iterations: u32,
    },

    #[error("Herglotz sign lost at eta = {eta} during iteration {iteration}")]
    HerglotzLoss { eta: Complex64, iteration: u32 },

    #[error("singular node encountered while averaging the block resolvent")]
    SingularNode,

    #[error("divergent Gaussian expectation at w = 0 requested where a finite value is required")]
    DivergentExpectation,

    #[error("bracketing failed while solving for w(lambda): {0}")]
    BracketFailure(String),

    #[error("rectangle too small: {0}")]
    InsufficientRectangle(String),

    #[error("target grid covers only {coverage:.4} of the empirical points (need >= 0.99)")]
    Coverage { coverage: f64 },

    #[error("empty sample set")]
    EmptySamples,

    #[error("cache format error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn backend(context: impl Into<String>, source: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend {
            context: context.into(),
            source,
        }
    }
}
