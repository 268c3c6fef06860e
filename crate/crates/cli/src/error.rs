use std::fmt;

/// A failure carrying its process exit code: 1 when the input was valid but
/// the objective does not hold, 2 for usage, parse and I/O problems.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, msg: msg.into() }
    }

    pub fn negative(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_NEGATIVE, msg: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<qexp::Error> for CliError {
    fn from(e: qexp::Error) -> Self {
        match e {
            qexp::Error::ObjectiveNotSatisfied | qexp::Error::EmptyState => CliError::negative(e.to_string()),
            other => CliError::usage(other.to_string()),
        }
    }
}

impl From<qexp::ParseError> for CliError {
    fn from(e: qexp::ParseError) -> Self {
        CliError::usage(format!("parse error: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::usage(format!("json: {e}"))
    }
}
