//! In-process worker pool backend.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::objectives::{evaluate_checked, Objective, ObjectiveRegistry};

use super::{EvalJob, EvalResult, Evaluator};

/// Evaluates batches on `workers` threads against an objective registry.
/// Values are identical to sequential evaluation; only wall time varies.
pub struct PoolEvaluator {
    registry: Arc<ObjectiveRegistry>,
    workers: usize,
}

impl PoolEvaluator {
    pub fn new(registry: Arc<ObjectiveRegistry>, workers: usize) -> Result<Self> {
        if workers < 1 {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        Ok(Self { registry, workers })
    }

    /// Single-objective convenience constructor.
    pub fn for_objective(objective: Arc<dyn Objective>, workers: usize) -> Result<Self> {
        let mut registry = ObjectiveRegistry::new();
        registry.register(objective);
        Self::new(Arc::new(registry), workers)
    }
}

pub fn evaluate_batch(
    jobs: &[EvalJob],
    registry: &ObjectiveRegistry,
    workers: usize,
) -> Result<Vec<EvalResult>> {
    if workers < 1 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    if jobs.is_empty() {
        return Ok(Vec::new());
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<EvalResult>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let job = &jobs[i];
                let started = Instant::now();
                let outcome = registry
                    .get(&job.objective_id)
                    .and_then(|obj| evaluate_checked(obj.as_ref(), &job.x))
                    .map(|value| EvalResult {
                        job_id: job.job_id,
                        value,
                        wall_time: started.elapsed(),
                    })
                    .map_err(|e| Error::JobFailed {
                        job_id: job.job_id,
                        message: e.to_string(),
                    });
                *slots[i].lock().expect("result slot") = Some(outcome);
            });
        }
    });

    let mut results = Vec::with_capacity(jobs.len());
    for slot in slots {
        let outcome = slot
            .into_inner()
            .expect("result slot")
            .expect("all slots filled after scope join");
        results.push(outcome?);
    }
    results.sort_by_key(|r| r.job_id);
    Ok(results)
}

impl Evaluator for PoolEvaluator {
    fn evaluate(&self, jobs: &[EvalJob]) -> Result<Vec<EvalResult>> {
        evaluate_batch(jobs, &self.registry, self.workers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{rastrigin_cost, RastriginObjective};
    use crate::rng::RngStream;

    fn rastrigin_jobs(n: usize, dim: usize) -> (Arc<ObjectiveRegistry>, Vec<EvalJob>) {
        let objective = Arc::new(RastriginObjective::standard(dim).unwrap());
        let id = objective.id().to_string();
        let mut registry = ObjectiveRegistry::new();
        registry.register(objective);
        let mut rng = RngStream::new(3).fork("pool");
        let jobs = (0..n)
            .map(|i| EvalJob {
                job_id: i as u64 + 1,
                x: crate::bounds::ControlVector::new(
                    (0..dim).map(|_| rng.uniform_in(-5.12, 5.12)).collect(),
                ),
                objective_id: id.clone(),
            })
            .collect();
        (Arc::new(registry), jobs)
    }

    #[test]
    fn empty_batch_is_empty_result() {
        let (registry, _) = rastrigin_jobs(1, 2);
        assert!(evaluate_batch(&[], &registry, 4).unwrap().is_empty());
    }

    #[test]
    fn worker_count_does_not_change_values() {
        let (registry, jobs) = rastrigin_jobs(40, 5);
        let one: Vec<f64> = evaluate_batch(&jobs, &registry, 1)
            .unwrap()
            .iter()
            .map(|r| r.value)
            .collect();
        let eight: Vec<f64> = evaluate_batch(&jobs, &registry, 8)
            .unwrap()
            .iter()
            .map(|r| r.value)
            .collect();
        assert_eq!(one, eight);
    }

    #[test]
    fn matches_sequential_oracle() {
        let (registry, jobs) = rastrigin_jobs(40, 4);
        let results = evaluate_batch(&jobs, &registry, 4).unwrap();
        assert_eq!(results.len(), 40);
        for (r, job) in results.iter().zip(&jobs) {
            assert_eq!(r.job_id, job.job_id);
            let direct = -rastrigin_cost(job.x.as_slice()).unwrap();
            assert_eq!(r.value, direct);
        }
    }

    #[test]
    fn unknown_objective_fails_with_job_id() {
        let (registry, mut jobs) = rastrigin_jobs(3, 2);
        jobs[1].objective_id = "missing".into();
        match evaluate_batch(&jobs, &registry, 2) {
            Err(Error::JobFailed { job_id, .. }) => assert_eq!(job_id, 2),
            other => panic!("expected JobFailed, got {other:?}"),
        }
    }
}
