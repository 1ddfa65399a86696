use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments to a library operation (shape mismatch, empty input, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An episode could not be sampled under the requested constraints.
    #[error("episode sampling failed: {0}")]
    Sampling(String),

    /// A file did not match its declared binary or text format.
    #[error("format error: {0}")]
    Format(String),

    /// Background and one-shot splits share classes.
    #[error("class leakage: {0}")]
    Leakage(String),

    /// Training produced a non-finite loss, gradient, or parameter.
    #[error("training diverged: {0}")]
    Diverged(String),

    /// Bad experiment configuration (unknown model, invalid counts, ...).
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code for the CLI. Each error family gets its own code so
    /// scripts can tell a bad flag from a corrupt file.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Format(_) => 3,
            Error::Leakage(_) => 4,
            Error::Diverged(_) => 5,
            _ => 1,
        }
    }
}
