use std::fmt;

use thiserror::Error;

/// A malformed textual input (state, setup file, element, objective spec, ...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    msg: String,
}

impl ParseError {
    pub fn new(msg: impl Into<String>) -> Self {
        ParseError { msg: msg.into() }
    }

    pub fn at_line(line: usize, err: ParseError) -> Self {
        ParseError::new(format!("line {line}: {}", err.msg))
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("mode {label} lies outside the encoding space |m| <= {max_oam}")]
    CutoffExceeded { label: String, max_oam: i32 },
    #[error("invalid setup: {0}")]
    InvalidSetup(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("empty state")]
    EmptyState,
    #[error("zero operator")]
    ZeroOperator,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },
    #[error("setup does not satisfy the objective")]
    ObjectiveNotSatisfied,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
