use thiserror::Error;

/// Errors produced by cloud I/O, generation and geometry operations.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty cloud")]
    EmptyCloud,

    #[error("non-finite coordinate at line {line}")]
    NonFinite { line: usize },

    #[error("degenerate cloud: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("isolated vertex {0}: out-degree is zero")]
    IsolatedVertex(usize),
}

impl GeomError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        GeomError::Io {
            path: path.into(),
            source,
        }
    }
}
