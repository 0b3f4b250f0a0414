use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    /// Non-finite loss. `last_finite_epoch` is `None` when the very first epoch diverged.
    #[error("training diverged at epoch {epoch} ({context}); last finite epoch: {}",
        last_finite_epoch.map(|e| e.to_string()).unwrap_or_else(|| "none".into()))]
    Divergence {
        epoch: usize,
        last_finite_epoch: Option<usize>,
        context: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Prefix the divergence context, leaving other variants untouched.
    pub fn with_context(self, prefix: &str) -> Self {
        match self {
            Error::Divergence {
                epoch,
                last_finite_epoch,
                context,
            } => Error::Divergence {
                epoch,
                last_finite_epoch,
                context: format!("{prefix}: {context}"),
            },
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
