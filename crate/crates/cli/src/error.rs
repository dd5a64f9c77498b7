use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint was trained on a different system block (checkpoint {checkpoint}, config {config})")]
    HashMismatch { checkpoint: String, config: String },
    #[error("malformed metrics file: {0}")]
    Metrics(String),
    #[error("training diverged: {0}")]
    Collapse(String),
    #[error("{0} verification check(s) failed")]
    VerifyFailed(usize),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(coexist_core::Error),
}

impl From<coexist_core::Error> for CliError {
    fn from(e: coexist_core::Error) -> Self {
        match e {
            coexist_core::Error::Config(msg) => CliError::Config(msg),
            coexist_core::Error::NonFinite(msg) => CliError::Collapse(msg),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit status for this failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::HashMismatch { .. } | CliError::Metrics(_) => 2,
            CliError::Collapse(_) => 3,
            CliError::VerifyFailed(_) | CliError::Io { .. } | CliError::Core(_) => 1,
        }
    }
}
