use std::fmt;

use thiserror::Error;

use crate::dsp::DspError;

/// A named invariant that a document or value fails.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(rule: &'static str, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            rule,
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.path, self.message)
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("invariant violation: {}", join(.0))]
    Invariant(Vec<Violation>),

    #[error(transparent)]
    Dsp(#[from] DspError),

    #[error("infeasible schedule: {constraint}")]
    Infeasible { constraint: String },

    #[error("unknown clip `{0}`")]
    MissingClip(String),

    #[error("wav: {0}")]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("response log line {line}: {message}")]
    ResponseFormat { line: usize, message: String },
}

impl Error {
    /// Violations carried by an invariant error, if any.
    pub fn violations(&self) -> &[Violation] {
        match self {
            Error::Invariant(v) => v,
            _ => &[],
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
