use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("parameter '{0}' already registered")]
    DuplicateParameter(String),
    #[error("backward already ran on this tape; build a new tape before calling it again")]
    BackwardTwice,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint format error in {path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
