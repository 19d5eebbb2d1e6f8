use std::io;
use std::process::ExitCode;

use qlab_core::diagnostics::DiagnosticsError;
use qlab_core::frequency::FrequencyError;
use qlab_core::seedlab::SeedError;
use qlab_core::store::StoreError;
use qlab_core::{EngineError, Outcome};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("recursion stopped before the horizon: {0}")]
    Death(Outcome),
    #[error("{0}")]
    Overflow(EngineError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Parity(String),
    #[error("checkpoint: {0}")]
    Checkpoint(StoreError),
    #[error("{failed} of {total} checks failed")]
    VerifyFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Death(_) => 3,
            CliError::Overflow(_) => 4,
            CliError::Io(_) => 5,
            CliError::Parity(_) => 6,
            CliError::Checkpoint(_) => 7,
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Overflow { .. } => CliError::Overflow(e),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(io) => CliError::Io(io),
            other => CliError::Checkpoint(other),
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::Parity { .. } => CliError::Parity(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<FrequencyError> for CliError {
    fn from(e: FrequencyError) -> Self {
        match e {
            FrequencyError::Parity { .. } => CliError::Parity(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SeedError> for CliError {
    fn from(e: SeedError) -> Self {
        match e {
            SeedError::Engine(engine) => engine.into(),
            SeedError::Config(msg) => CliError::Config(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}
