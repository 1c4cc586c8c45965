//! Command-line harness: standalone simulation, bot cohorts, the analysis
//! pipeline and a session server.

pub mod analyze;
pub mod bot;
pub mod cohort;
pub mod provenance;
pub mod simulate;

use std::process::ExitCode;

/// Errors that end a CLI run, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed inputs, or no data.
    #[error("{0:#}")]
    Input(anyhow::Error),
    /// The run finished but its results missed a published target.
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(1),
            CliError::Check(_) => ExitCode::from(2),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Input(e)
    }
}
