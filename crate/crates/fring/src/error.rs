use std::path::PathBuf;

use fring_core::Error as CoreError;

/// Failures surfaced by the command-line layer.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NOT_FOUND: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::NotFound(_) => EXIT_NOT_FOUND,
            CliError::Io { .. } | CliError::Csv { .. } => EXIT_IO,
            // malformed config files are user input
            CliError::Json { .. } => EXIT_VALIDATION,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::EigensolverFailure | CoreError::DegenerateStep(_) => CliError::Numerical(msg),
            CoreError::NotFound(_) => CliError::NotFound(msg),
            _ => CliError::Validation(msg),
        }
    }
}
