use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid bounds: {0}")]
    InvalidBounds(String),

    #[error("non-finite value in {context}: {value}")]
    NonFinite { context: String, value: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("no evaluations recorded yet")]
    NotEvaluated,

    #[error("unknown engine '{0}'")]
    UnknownEngine(String),

    #[error("unknown objective '{0}'")]
    UnknownObjective(String),

    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),

    #[error("job {job_id} failed: {message}")]
    JobFailed { job_id: u64, message: String },

    #[error("timed out waiting for results, missing job ids: {0:?}")]
    CollectTimeout(Vec<u64>),

    #[error("duplicate job id {0}")]
    DuplicateJob(u64),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("queue error: {0}")]
    Queue(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
