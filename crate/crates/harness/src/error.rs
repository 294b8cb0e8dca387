use advisor_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("policy artifact not found: {0}")]
    PolicyNotFound(String),
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("no records to summarize")]
    EmptyInput,
    #[error("agent chose action {action}, which is infeasible at visible state {x}")]
    InfeasibleAction { action: usize, x: usize },
    #[error("suggestion source failed: {0}")]
    Suggester(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, HarnessError>;
