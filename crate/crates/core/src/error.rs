use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid state: {0}")]
    State(String),
    #[error("Krylov approximation failed to converge: {0}")]
    Convergence(String),
    #[error("iteration limit reached: {0}")]
    IterationLimit(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("step control aborted: {0}")]
    StepControl(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
