use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum CoreError {
    /// The observation received has zero probability under the current belief.
    #[error("observation has zero likelihood under the belief (mass {mass:e})")]
    ZeroLikelihood { mass: f64 },

    #[error("policy has no alpha vectors for visible state {x}")]
    NoVectors { x: usize },

    #[error("model failed validation with {} violation(s); first: {}", .0.len(), .0[0])]
    InvalidModel(Vec<Violation>),

    #[error("solver bounds crossed by {gap:e} (lower {lower}, upper {upper})")]
    Diverged { lower: f64, upper: f64, gap: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("a dynamic type model needs at least two types (t_p = {t_p})")]
    SingleTypeDynamic { t_p: f64 },

    #[error("type chain does not mix when t_p = 0")]
    NoMixing,

    #[error("ask cost must be <= 0, got {0}")]
    InvalidCost(f64),

    #[error("invalid suggester specification: {0}")]
    InvalidSpec(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed document {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;
