use std::fmt;

use volseg_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// A command failure tagged with its exit status: usage and input problems
/// exit 2, computation and output failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn failure(msg: impl Into<String>) -> Self {
        CliError::Failure(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    /// Treat any error as a computation or output failure.
    pub fn output(e: Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io { .. }
            | Error::Format(_)
            | Error::UnsupportedDatatype(_)
            | Error::Truncated { .. }
            | Error::Input(_)
            | Error::Params(_)
            | Error::Spec(_)
            | Error::Exists(_)
            | Error::EmptyCohort
            | Error::Csv(_)
            | Error::Json(_) => CliError::Usage(msg),
            Error::Precision { .. }
            | Error::Geometry(_)
            | Error::EmptyMask(_)
            | Error::DegenerateHistogram(_)
            | Error::DegenerateVariance(_)
            | Error::Domain(_)
            | Error::DivisionByZero(_) => CliError::Failure(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
