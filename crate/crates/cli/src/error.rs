use std::process::ExitCode;

/// Failures of the command-line front end, each with an exit code and a
/// stable machine-readable tag printed on stderr.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] chorin_core::Error),
    #[error("{failed} of {total} checks failed")]
    Acceptance { failed: usize, total: usize },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "E_CONFIG",
            CliError::Io(_) => "E_IO",
            CliError::Core(e) if e.is_numerical() => match e {
                chorin_core::Error::TooManyFailures { .. } => "E_REALIZATIONS",
                _ => "E_SOLVER",
            },
            CliError::Core(_) => "E_INVALID",
            CliError::Acceptance { .. } => "E_ACCEPTANCE",
        }
    }

    pub fn exit_status(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(_) => 1,
            CliError::Acceptance { .. } => 3,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.exit_status())
    }
}
