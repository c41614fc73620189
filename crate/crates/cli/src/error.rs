use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// bad flags, config fields or target files
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] barron_core::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// 2 for usage problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(barron_core::Error::Parse(_) | barron_core::Error::InvalidArgument(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
