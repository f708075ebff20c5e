use carryscan_core::error::{ConfigError, EvalError, FormatError, SimError, TrackingError};
use carryscan_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("tracking: {0}")]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 1 for usage and configuration errors, 2 for unreadable or mismatched
    /// data, 3 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Format(_) | CliError::Sim(_) | CliError::Nn(NnError::Format(_) | NnError::Checkpoint(_) | NnError::EmptyDataset) => 2,
            CliError::Eval(_) | CliError::Io { .. } => 2,
            CliError::Tracking(_) | CliError::Nn(_) => 3,
        }
    }
}
