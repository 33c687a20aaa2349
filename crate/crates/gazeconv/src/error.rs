use std::path::Path;

use gazeconv_core::Error as CoreError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Failure classes of a command, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration, or a model used for the wrong task. Exit 2.
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or insufficient data. Exit 3.
    #[error("{0}")]
    Data(String),
    /// Training produced a non-finite loss. Exit 4.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Config(_) | CoreError::Shape(_) | CoreError::Label { .. } => {
                CliError::Usage(e.to_string())
            }
            CoreError::Data(_) | CoreError::Format(_) | CoreError::Length(_) => {
                CliError::Data(e.to_string())
            }
            CoreError::NonFinite { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

/// Prefixes a core error with the file it came from, keeping its class.
pub(crate) fn in_file(path: &Path, e: CoreError) -> CliError {
    match CliError::from(e) {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        CliError::Numeric(m) => CliError::Numeric(format!("{}: {m}", path.display())),
    }
}
