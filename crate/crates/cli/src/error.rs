use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}config key `{key}`: {reason}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Config {
        key: String,
        line: Option<usize>,
        reason: String,
    },

    #[error("image {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV: {reason}")]
    Csv { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] uzawa_core::Error),

    #[error("run diverged at update {0}")]
    Diverged(usize),

    #[error("verification failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    /// Process exit status: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Diverged(_) | CliError::CheckFailed(_) => 2,
            CliError::Core(uzawa_core::Error::NonFinite(_)) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
