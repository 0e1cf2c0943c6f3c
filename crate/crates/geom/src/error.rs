use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error("no body vertices")]
    NoBodyVertices,
    #[error("joint count mismatch: {left} vs {right}")]
    JointCountMismatch { left: usize, right: usize },
    #[error("parse error in {path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
