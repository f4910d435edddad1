use thiserror::Error;

use flowbox_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Audit or verification failed.
    #[error("{0}")]
    Audit(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Json(_) => 1,
            CliError::Audit(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parse(_)
            | CoreError::Arity { .. }
            | CoreError::Dimension { .. }
            | CoreError::UnknownSystem(_)
            | CoreError::Config(_) => CliError::Usage(e.to_string()),
            CoreError::NotTransversal { .. } | CoreError::RankDeficient { .. } => CliError::Audit(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
