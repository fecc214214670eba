use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: not found")]
    NotFound { path: PathBuf },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate id: {id} (line {line})")]
    DuplicateId { id: String, line: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown post: {0}")]
    UnknownPost(String),

    #[error("score {0} is outside 0..=10")]
    ScoreOutOfRange(i64),

    #[error("post {post_id}: {role} has already scored")]
    DoubleSubmission { post_id: String, role: String },

    #[error("post {post_id}: {message}")]
    WrongState { post_id: String, message: String },

    #[error("corrupt event log at line {line}: {message}")]
    CorruptLog { line: usize, message: String },

    #[error("naive bayes requires non-negative features (found {value} at feature {index})")]
    NegativeFeature { index: usize, value: f64 },

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("empty dataset")]
    EmptyData,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training diverged ({0}); try a smaller learning rate")]
    Divergence(String),

    #[error("{0}")]
    Model(String),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Opens `path` for reading, mapping a missing file to [`Error::NotFound`].
    pub(crate) fn open(path: &std::path::Path) -> Result<std::fs::File> {
        std::fs::File::open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::NotFound {
                    path: path.to_path_buf(),
                }
            } else {
                Error::io(path.display().to_string(), e)
            }
        })
    }

    /// True for filesystem failures (exit code 2 in the CLI).
    pub fn is_io(&self) -> bool {
        matches!(self, Error::NotFound { .. } | Error::Io { .. })
    }
}
