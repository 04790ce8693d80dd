use std::path::Path;

use thiserror::Error;

use ebm_triage::bundle::BundleError;
use ebm_triage::embed::EmbedError;
use ebm_triage::eval::EvalError;
use ebm_triage::forest::ForestError;
use ebm_triage::linear::LinearError;
use ebm_triage::textpipe::TextPipeError;
use ebm_triage::triage::TriageError;
use ebm_triage_server::ConfigError;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_MISMATCH: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
            CliError::Mismatch(_) => EXIT_MISMATCH,
            CliError::Failed(_) => EXIT_FAILURE,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ForestError> for CliError {
    fn from(e: ForestError) -> Self {
        match e {
            ForestError::VocabularyMismatch { .. } | ForestError::DimensionMismatch { .. } => {
                CliError::Mismatch(e.to_string())
            }
            ForestError::InvalidParams(_) => CliError::Usage(e.to_string()),
            ForestError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<LinearError> for CliError {
    fn from(e: LinearError) -> Self {
        match e {
            LinearError::DimensionMismatch { .. } => CliError::Mismatch(e.to_string()),
            LinearError::InvalidParams(_) => CliError::Usage(e.to_string()),
            LinearError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<TextPipeError> for CliError {
    fn from(e: TextPipeError) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            EmbedError::Cache(_) => CliError::Io(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::BadRatio(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Missing(_) | BundleError::Io(_) => CliError::Io(e.to_string()),
            BundleError::ProviderMismatch { .. } => CliError::Mismatch(e.to_string()),
            BundleError::Forest(f) => f.into(),
            BundleError::Linear(l) => l.into(),
            BundleError::Vocabulary(v) => v.into(),
        }
    }
}

impl From<TriageError> for CliError {
    fn from(e: TriageError) -> Self {
        match e {
            TriageError::Forest(f) => f.into(),
            TriageError::Linear(l) => l.into(),
            TriageError::Embed(x) => x.into(),
            TriageError::Log(io) => io.into(),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Parse(_) => CliError::Usage(e.to_string()),
            ConfigError::Bundle(b) => b.into(),
            ConfigError::Embed(x) => x.into(),
            ConfigError::Triage(t) => t.into(),
            ConfigError::Io(io) => io.into(),
        }
    }
}
