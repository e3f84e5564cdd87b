use thiserror::Error;

/// Errors produced by the channel calculus.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian within tolerance (max |A - A†| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("invalid instrument: {0}")]
    InvalidInstrument(String),

    #[error("invalid stochastic matrix: {0}")]
    InvalidStochasticMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sdp problem is inconsistent: {0}")]
    InconsistentProblem(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}
