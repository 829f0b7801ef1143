use std::process::ExitCode;

/// CLI failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit 1: bad flags, config or unknown names.
    #[error("{0}")]
    Usage(String),
    /// Exit 2: unreadable or malformed input data.
    #[error("{0}")]
    Data(String),
    /// Exit 3: a model or optimizer failed at run time.
    #[error("{0}")]
    Model(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Model(_) => 3,
        }
    }

    pub fn usage(msg: impl std::fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    /// Errors raised while reading inputs.
    pub fn data(e: ordinalkit::Error) -> Self {
        CliError::Data(e.to_string())
    }

    /// Errors raised while computing: data problems stay exit 2.
    pub fn compute(e: ordinalkit::Error) -> Self {
        match e {
            ordinalkit::Error::InvalidInput(_) | ordinalkit::Error::EmptyInput(_) => CliError::Data(e.to_string()),
            e if e.is_data_error() => CliError::Data(e.to_string()),
            e => CliError::Model(e.to_string()),
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
