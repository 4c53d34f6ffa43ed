//! Error classification for the exit-code contract: 1 for invalid input,
//! 2 for failed file access.

use std::fmt;
use std::io;
use std::path::Path;

use augforge::augment::AugmentError;
use augforge::experiment::{LedgerError, PlanError, ReportError, StatsError};
use augforge::latent::LatentError;
use augforge::metrics::MetricsError;
use augforge::scene_io::SceneError;
use augforge::search::SearchError;
use augforge::strategy::StrategyError;

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Io(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }

    pub fn flag(flag: &str, msg: impl fmt::Display) -> Self {
        Self::Invalid(format!("--{flag}: {msg}"))
    }

    pub fn io(path: &Path, e: io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Invalid(_) => 1,
            Self::Io(_) => 2,
        }
    }

    /// Prefixes the message with the file or flag it concerns.
    pub fn context(self, what: impl fmt::Display) -> Self {
        match self {
            Self::Invalid(m) => Self::Invalid(format!("{what}: {m}")),
            Self::Io(m) => Self::Io(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Invalid(m) | Self::Io(m) => f.write_str(m),
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::Io { .. } => Self::Io(e.to_string()),
            other => Self::Invalid(other.to_string()),
        }
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        match e {
            AugmentError::Scene(s) => s.into(),
            other => Self::Invalid(other.to_string()),
        }
    }
}

impl From<LatentError> for CliError {
    fn from(e: LatentError) -> Self {
        match e {
            LatentError::Io { .. } => Self::Io(e.to_string()),
            other => Self::Invalid(other.to_string()),
        }
    }
}

impl From<StrategyError> for CliError {
    fn from(e: StrategyError) -> Self {
        match e {
            StrategyError::Io { .. } => Self::Io(e.to_string()),
            StrategyError::Augment(a) => a.into(),
            other => Self::Invalid(other.to_string()),
        }
    }
}

impl From<LedgerError> for CliError {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::Io { .. } => Self::Io(e.to_string()),
            other => Self::Invalid(other.to_string()),
        }
    }
}

macro_rules! invalid_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Invalid(e.to_string())
            }
        })*
    };
}

invalid_from!(
    SearchError,
    MetricsError,
    PlanError,
    ReportError,
    StatsError
);
