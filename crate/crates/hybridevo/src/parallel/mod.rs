//! Parallel batch evaluation with a deterministic result contract.
//!
//! Candidates are generated entirely on the orchestrator; evaluation fans
//! out to an in-process worker pool or a shared-directory job queue, and
//! results always come back ordered by job id. Objectives are pure, so the
//! optimization trajectory is independent of worker count and backend.

pub mod filequeue;
pub mod pool;

use std::time::Duration;

use crate::bounds::ControlVector;
use crate::error::Result;

/// One candidate awaiting evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalJob {
    pub job_id: u64,
    pub x: ControlVector,
    pub objective_id: String,
}

/// One finished evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub job_id: u64,
    pub value: f64,
    pub wall_time: Duration,
}

/// Batch evaluation backend: one result per job, ordered by job id.
pub trait Evaluator {
    fn evaluate(&self, jobs: &[EvalJob]) -> Result<Vec<EvalResult>>;
}

pub use filequeue::{FileQueue, FileQueueEvaluator};
pub use pool::PoolEvaluator;
