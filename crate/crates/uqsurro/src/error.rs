use thiserror::Error;
use uqsurro_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    /// Training produced a non-finite loss.
    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) => 3,
            HarnessError::Divergence(_) => 4,
            HarnessError::Io { .. } => 1,
        }
    }

    /// Wrap a core error with a short description of what was being done.
    pub fn core(context: &str, e: CoreError) -> Self {
        let msg = format!("{context}: {e}");
        match e {
            CoreError::Divergence { .. } => HarnessError::Divergence(msg),
            CoreError::InvalidArchitecture(_) | CoreError::InvalidHyperparameter(_) | CoreError::Schema(_) => {
                HarnessError::Config(msg)
            }
            _ => HarnessError::Data(msg),
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
