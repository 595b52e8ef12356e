use std::fmt;
use std::path::PathBuf;

/// A problem-spec error located at a 1-based line and column.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl SpecError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for SpecError {}

#[derive(Debug, thiserror::Error)]
pub enum KitError {
    #[error("spec error at {0}")]
    Spec(#[from] SpecError),

    #[error(transparent)]
    Model(#[from] pile_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, KitError>;

impl KitError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KitError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for bad specs or arguments, 3 for numerical
    /// failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            KitError::Spec(_) | KitError::Usage(_) => 2,
            KitError::Model(e) if e.is_numerical() => 3,
            KitError::Model(_) => 2,
            KitError::Io { .. } | KitError::Data(_) | KitError::Json(_) | KitError::Csv(_) => 1,
        }
    }
}
