use thiserror::Error;

/// Errors produced by the core library.
#[derive(Error, Debug)]
pub enum Error {
    #[error("shape mismatch in {op}: left is {left}, right is {right}")]
    ShapeMismatch {
        op: &'static str,
        left: String,
        right: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, left: impl Into<String>, right: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            left: left.into(),
            right: right.into(),
        }
    }
}
