use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Checkpoint(String),

    #[error("{0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Stable, machine-readable category name.
    pub fn category(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Checkpoint(_) => "checkpoint",
            HarnessError::Numeric(_) => "numeric",
            HarnessError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Checkpoint(_) => 3,
            HarnessError::Numeric(_) => 4,
            HarnessError::Io { .. } => 5,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<swarm_core::Error> for HarnessError {
    fn from(e: swarm_core::Error) -> Self {
        use swarm_core::Error as E;
        match e {
            E::NonFinite(_) => HarnessError::Numeric(e.to_string()),
            E::DimensionMismatch { .. } => HarnessError::Checkpoint(e.to_string()),
            E::InvalidConfig(_) | E::Placement { .. } | E::ModeTaskMismatch { .. } => {
                HarnessError::Config(e.to_string())
            }
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
