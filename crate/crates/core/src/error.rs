use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("gradient requested for a value recorded on a different tape")]
    TapeMismatch,

    #[error(
        "exhaustive enumeration needs {primitives}^{max_depth} candidates, above the cap of {cap}; \
         use ray launching (--method fibonacci) instead"
    )]
    EnumerationCap {
        primitives: usize,
        max_depth: usize,
        cap: u64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("optimization diverged at iteration {iteration}: loss is {loss}")]
    Divergence { iteration: usize, loss: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True for errors caused by bad input (flags, files, scene content)
    /// rather than by a broken internal invariant.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Invariant(_) | Error::TapeMismatch)
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
