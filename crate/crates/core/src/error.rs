use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("path loss undefined for non-positive distance {0} m")]
    NonPositiveDistance(f64),

    #[error("scenario generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("invalid scenario instance: {0}")]
    InvalidInstance(String),

    #[error("graph construction failed: {0}")]
    Graph(String),

    #[error("estimator infeasible: {0}")]
    Infeasible(String),

    #[error("dataset parse error at line {line} (record {record}): {message}")]
    Parse {
        line: usize,
        record: usize,
        message: String,
    },

    #[error("unsupported dataset version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
