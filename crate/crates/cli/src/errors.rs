//! CLI error carrying the process exit code.
//!
//! Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure.

use magkit_core::Error as CoreError;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::SingularMatrix { .. }
            | CoreError::DegenerateAugmentation { .. }
            | CoreError::NotScattered { .. }
            | CoreError::NoUsableScale
            | CoreError::RidgeRequired
            | CoreError::AllGaps => 3,
            _ => 2,
        };
        Self { code, message: format!("error: {e}") }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(format!("error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::data(format!("error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
