use thiserror::Error;

/// Errors produced by model construction, estimation and attack synthesis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("backward powers undefined: {0}")]
    SingularTransition(String),

    #[error("window not observable: rank(H) = {rank}, expected {expected}")]
    WindowNotObservable { rank: usize, expected: usize },

    #[error("support admits no stealthy injection")]
    EmptyNullSpace,

    #[error("estimator diverged: {0}")]
    Diverged(String),

    #[error("update failed: {0}")]
    UpdateFailed(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
