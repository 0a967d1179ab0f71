use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Operands that do not live in the same truncated algebra.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An argument outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A polynomial that is not in the span of the evaluated Hall basis.
    #[error("not a Lie element; residual = {residual}")]
    NotLieElement { residual: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn at(self, line: usize, column: usize) -> Self {
        match self {
            Error::Parse { message, .. } => Error::Parse {
                line,
                column,
                message,
            },
            other => Error::Parse {
                line,
                column,
                message: other.to_string(),
            },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
