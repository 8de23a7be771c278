use std::path::PathBuf;

/// Errors surfaced by the command-line tool.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ihgp_core::Error),

    #[error("{0}")]
    Config(String),

    /// Malformed or inconsistent data file.
    #[error("{0}")]
    Data(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    /// The optimizer could not make progress; carries the trace so far.
    #[error("optimizer diverged after {iterations} iterations: {reason}")]
    Optimizer { iterations: usize, reason: String },
}

impl CliError {
    /// Short machine-readable tag printed before the message.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Model(e) => e.kind(),
            CliError::Config(_) => "config",
            CliError::Data(_) => "input",
            CliError::Io { .. } => "io",
            CliError::Csv(_) => "input",
            CliError::Json(_) => "config",
            CliError::Optimizer { .. } => "optimizer",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
