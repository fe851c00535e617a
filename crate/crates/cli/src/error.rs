use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid configuration, or a missing input named by it.
    #[error("config error: {0}")]
    Config(String),
    /// An output of an earlier subcommand is absent.
    #[error("missing artifact {}: {what}", path.display())]
    MissingArtifact { path: PathBuf, what: String },
    #[error("{0}")]
    Runtime(String),
    #[error("{failed} scenario assertion(s) failed")]
    AssertionsFailed { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) | CliError::AssertionsFailed { .. } => 1,
            CliError::Config(_) => 2,
            CliError::MissingArtifact { .. } => 3,
        }
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<surveyforge::Error> for CliError {
    fn from(e: surveyforge::Error) -> Self {
        match e {
            surveyforge::Error::Sim(surveyforge::sim::SimError::Config(m)) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                surveyforge::Error::from(e).into()
            }
        })*
    };
}

runtime_from!(
    surveyforge::frame::FrameError,
    surveyforge::design::DesignError,
    surveyforge::adjust::AdjustError,
    surveyforge::estimate::EstimateError,
    surveyforge::sim::SimError,
    std::io::Error,
    csv::Error
);
