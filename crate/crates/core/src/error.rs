//! Error taxonomy shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric or structural parameter is outside its documented domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A config file or CLI combination cannot describe a runnable job.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two array-like arguments disagree on their shared dimension.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// An input is structurally valid but carries no usable signal
    /// (constant features, zero self-dependence, zero observational accuracy).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The train loop saw a non-finite loss and stopped.
    #[error("training aborted at epoch {epoch} ({head} head, lr {lr:e}): non-finite loss")]
    TrainingAborted {
        epoch: usize,
        lr: f64,
        head: &'static str,
    },

    /// A CSV or other textual payload failed to parse.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for anything the user can fix in a
    /// config or input file, 3 for a training abort, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidParameter { .. }
            | Error::Config(_)
            | Error::Parse(_)
            | Error::Json(_)
            | Error::ShapeMismatch(_) => 2,
            Error::TrainingAborted { .. } => 3,
            _ => 1,
        }
    }
}
