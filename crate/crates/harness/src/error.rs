use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] lowrank_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io { context: context.into(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Core(e) if is_divergence(e) => 3,
            _ => 1,
        }
    }
}

/// Failures that mean the integration itself broke down, as opposed to misuse.
pub fn is_divergence(e: &lowrank_core::Error) -> bool {
    use lowrank_core::Error::*;
    matches!(e, ModelBlowup { .. } | BaselineSingular { .. } | NonFinite(_))
}

pub type Result<T> = std::result::Result<T, HarnessError>;
