use thiserror::Error;

/// Command failures, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration or arguments: exit code 2.
    #[error("input error: {0}")]
    Input(String),
    /// A numerical procedure failed or a check did not pass: exit code 1.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<qheat::Error> for CliError {
    fn from(e: qheat::Error) -> Self {
        match e {
            qheat::Error::Numeric { .. } => CliError::Numeric(e.to_string()),
            qheat::Error::Input(_) | qheat::Error::Domain(_) => CliError::Input(e.to_string()),
        }
    }
}
