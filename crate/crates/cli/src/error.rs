use std::fmt;

use actionspace::analytics::AnalyticsError;
use actionspace::corpus::CorpusError;
use actionspace::{GenError, InductionError, PoolError};

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Printed as one `error[<kind>]: <message>` line on stderr.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn runtime(kind: &'static str, message: impl fmt::Display) -> Self {
        Self { kind, message: message.to_string(), code: EXIT_RUNTIME }
    }

    pub fn usage(message: impl fmt::Display) -> Self {
        Self { kind: "usage", message: message.to_string(), code: EXIT_USAGE }
    }

    pub fn line(&self) -> String {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        format!("error[{}]: {}", self.kind, flat.join(" "))
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::runtime("io", e)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::runtime("corpus", e)
    }
}

impl From<PoolError> for CliError {
    fn from(e: PoolError) -> Self {
        Self::runtime("pool", e)
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        Self::runtime("generation", e)
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        let kind = match e {
            AnalyticsError::InvalidScore(_) | AnalyticsError::InconsistentRanking(_) | AnalyticsError::DuplicateAnnotation(_) => {
                "annotation"
            }
            AnalyticsError::UnsupportedFormat(_) => return Self::usage(e),
            _ => "analytics",
        };
        Self::runtime(kind, e)
    }
}

impl From<InductionError> for CliError {
    fn from(e: InductionError) -> Self {
        let kind = match &e {
            InductionError::InvalidConfig(_) => "config",
            InductionError::ConfigMismatch | InductionError::CorpusMismatch | InductionError::CorruptCheckpoint(_) => {
                "checkpoint"
            }
            InductionError::Aborted { .. } | InductionError::Generation(_) => "generation",
            InductionError::EmptySeedPool => "pool",
            _ => "induction",
        };
        Self::runtime(kind, e)
    }
}
