//! Error taxonomy of the command-line harness, aligned with its exit
//! codes: configuration problems exit 2, failed checks exit 1, numerical
//! blow-ups exit 3.

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("numerical blow-up: {0}")]
    BlowUp(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            CliError::Config(_) | CliError::Json(_) => 2,
            CliError::BlowUp(_) => 3,
            CliError::Io(_) => 2,
        }
    }

    /// Maps library errors: blow-ups keep their dedicated exit code, all
    /// other numerical-contract violations are configuration-level.
    pub fn from_core(e: sgns_core::Error) -> Self {
        match e {
            sgns_core::Error::BlowUp { .. } => CliError::BlowUp(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
