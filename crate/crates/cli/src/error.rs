use thiserror::Error;

/// Failure of a subcommand, mapped to the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// The audit or check ran and found problems. Exit status 1.
    #[error("{0}")]
    Failed(String),
    /// Bad configuration, or missing or inconsistent inputs. Exit status 2.
    #[error("{0}")]
    Input(String),
    /// A result broke a guarantee of the library. Exit status 3.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<rtsched::Error> for CliError {
    fn from(e: rtsched::Error) -> Self {
        match e {
            rtsched::Error::Invariant(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
