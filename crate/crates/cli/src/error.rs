use mehler_core::Error;

/// Failures mapped onto the stable exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    SingularTime(Error),
    #[error("{0}")]
    SingularD(Error),
    #[error("{0}")]
    Numerical(Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerificationFailed(_) | CliError::Numerical(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::SingularTime(_) => 3,
            CliError::SingularD(_) => 4,
        }
    }

    /// Errors raised while turning a config into an operator are config errors.
    pub(crate) fn from_config(e: Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularTime { .. } => CliError::SingularTime(e),
            Error::SingularD { .. } => CliError::SingularD(e),
            Error::NonCommuting { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::DimensionMismatch { .. }
            | Error::DomainError { .. }
            | Error::InvalidArgument(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}
