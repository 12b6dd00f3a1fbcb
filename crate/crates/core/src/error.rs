use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Inputs that make an operation mathematically meaningless, e.g. a
    /// zero-norm latent fed to the cosine credit.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("calibration failure: {0}")]
    CalibrationFailure(String),

    #[error("training diverged at batch {batch_index}: {detail}")]
    TrainingDiverged { batch_index: usize, detail: String },

    #[error("search aborted: {0}")]
    SearchAborted(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
