use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(qmonitor::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<qmonitor::Error> for CliError {
    fn from(e: qmonitor::Error) -> Self {
        use qmonitor::Error::*;
        match e {
            InvalidSpin(_) | InvalidTruncation(_) | InvalidState(_) | InvalidConfig(_) | DimensionMismatch { .. }
            | TooLarge { .. } | InsufficientTaus(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(3),
            CliError::Io(_) => ExitCode::from(1),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
