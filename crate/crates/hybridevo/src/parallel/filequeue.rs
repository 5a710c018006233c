//! Shared-directory job queue backend.
//!
//! Reproduces the multi-cluster, common-file-server deployment on any shared
//! filesystem. The master drops `job_<id>.task` files into `pending/`;
//! workers claim a job by renaming it into `running/` (the atomic rename is
//! the mutual-exclusion primitive), evaluate it, and write `job_<id>.result`
//! into `done/`. Failures produce `job_<id>.error` instead.
//!
//! File formats, newline-terminated text:
//! - task: line 1 the objective id, line 2 comma-separated control values
//! - result: a single line with the value
//! - error: a single line with the message
//!
//! All numbers are written with 17 significant digits, so parsing them back
//! reproduces the exact f64.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use crate::bounds::ControlVector;
use crate::error::{Error, Result};
use crate::objectives::{evaluate_checked, ObjectiveRegistry};

use super::{EvalJob, EvalResult, Evaluator};

pub const DEFAULT_POLL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone)]
pub struct FileQueue {
    pending: PathBuf,
    running: PathBuf,
    done: PathBuf,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Queue(format!("bad number '{s}'")))
}

pub fn render_task(job: &EvalJob) -> String {
    let values: Vec<String> = job.x.as_slice().iter().map(|v| fmt_f64(*v)).collect();
    format!("{}\n{}\n", job.objective_id, values.join(","))
}

pub fn parse_task(job_id: u64, text: &str) -> Result<EvalJob> {
    let mut lines = text.lines();
    let objective_id = lines
        .next()
        .filter(|l| !l.trim().is_empty())
        .ok_or_else(|| Error::Queue("task file missing objective id".into()))?
        .trim()
        .to_string();
    let values_line = lines
        .next()
        .ok_or_else(|| Error::Queue("task file missing control values".into()))?;
    let values: Vec<f64> = values_line
        .split(',')
        .map(parse_f64)
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::Queue("task file has no control values".into()));
    }
    Ok(EvalJob {
        job_id,
        x: ControlVector::new(values),
        objective_id,
    })
}

fn job_id_from_name(name: &str, suffix: &str) -> Option<u64> {
    name.strip_prefix("job_")?.strip_suffix(suffix)?.parse().ok()
}

/// Writes `content` to `dir/name` atomically: temp file in the same
/// directory, then rename.
fn atomic_write(dir: &Path, name: &str, content: &str) -> Result<()> {
    static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);
    let tmp = dir.join(format!(
        ".{name}.{}.{}.tmp",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

impl FileQueue {
    /// Opens an existing queue directory; `pending/`, `running/` and `done/`
    /// must already exist.
    pub fn open(dir: &Path) -> Result<Self> {
        let q = Self {
            pending: dir.join("pending"),
            running: dir.join("running"),
            done: dir.join("done"),
        };
        for d in [&q.pending, &q.running, &q.done] {
            if !d.is_dir() {
                return Err(Error::Queue(format!("missing queue directory {}", d.display())));
            }
        }
        Ok(q)
    }

    /// Creates the queue layout under `dir` and opens it.
    pub fn init(dir: &Path) -> Result<Self> {
        for sub in ["pending", "running", "done"] {
            std::fs::create_dir_all(dir.join(sub))?;
        }
        Self::open(dir)
    }

    /// Drops one `job_<id>.task` file per job into `pending/`. Re-submitting
    /// an id that exists anywhere in the queue is an error.
    pub fn submit(&self, jobs: &[EvalJob]) -> Result<()> {
        for job in jobs {
            let task_name = format!("job_{}.task", job.job_id);
            let exists = self.pending.join(&task_name).exists()
                || self.running.join(&task_name).exists()
                || self.done.join(format!("job_{}.result", job.job_id)).exists()
                || self.done.join(format!("job_{}.error", job.job_id)).exists();
            if exists {
                return Err(Error::DuplicateJob(job.job_id));
            }
            atomic_write(&self.pending, &task_name, &render_task(job))?;
        }
        Ok(())
    }

    fn pending_tasks(&self) -> Result<Vec<(u64, PathBuf)>> {
        let mut tasks = Vec::new();
        for entry in std::fs::read_dir(&self.pending)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(id) = job_id_from_name(&name, ".task") {
                tasks.push((id, entry.path()));
            }
        }
        tasks.sort_by_key(|(id, _)| *id);
        Ok(tasks)
    }

    /// Attempts to claim and process one pending job. Returns the processed
    /// job id, or `None` when nothing was available.
    pub fn process_one(&self, registry: &ObjectiveRegistry) -> Result<Option<u64>> {
        for (job_id, path) in self.pending_tasks()? {
            let claim = self.running.join(format!("job_{job_id}.task"));
            // The rename is the claim: exactly one worker wins.
            if std::fs::rename(&path, &claim).is_err() {
                continue;
            }
            let outcome = std::fs::read_to_string(&claim)
                .map_err(Error::from)
                .and_then(|text| parse_task(job_id, &text))
                .and_then(|job| {
                    let obj = registry.get(&job.objective_id)?;
                    evaluate_checked(obj.as_ref(), &job.x)
                });
            match outcome {
                Ok(value) => {
                    atomic_write(&self.done, &format!("job_{job_id}.result"), &format!("{}\n", fmt_f64(value)))?;
                }
                Err(e) => {
                    atomic_write(&self.done, &format!("job_{job_id}.error"), &format!("{e}\n"))?;
                }
            }
            std::fs::remove_file(&claim)?;
            return Ok(Some(job_id));
        }
        Ok(None)
    }

    /// Worker loop: claims and processes pending jobs until `shutdown` is
    /// set. Returns the number of jobs processed.
    pub fn run_worker(
        &self,
        registry: &ObjectiveRegistry,
        poll: Duration,
        shutdown: &AtomicBool,
    ) -> Result<usize> {
        let mut processed = 0;
        while !shutdown.load(Ordering::Relaxed) {
            if self.process_one(registry)?.is_some() {
                processed += 1;
            } else {
                std::thread::sleep(poll);
            }
        }
        Ok(processed)
    }

    /// Polls `done/` until every expected id has a result, returning them
    /// ordered by job id. Any error file fails the batch; a timeout names
    /// the missing ids.
    pub fn collect(
        &self,
        expected: &[u64],
        timeout: Duration,
        poll: Duration,
    ) -> Result<Vec<EvalResult>> {
        let started = Instant::now();
        let mut results: Vec<Option<EvalResult>> = vec![None; expected.len()];
        loop {
            for (slot, &id) in results.iter_mut().zip(expected) {
                if slot.is_some() {
                    continue;
                }
                let error_path = self.done.join(format!("job_{id}.error"));
                if error_path.exists() {
                    let message = std::fs::read_to_string(&error_path)?.trim().to_string();
                    return Err(Error::JobFailed { job_id: id, message });
                }
                let result_path = self.done.join(format!("job_{id}.result"));
                if result_path.exists() {
                    let value = parse_f64(&std::fs::read_to_string(&result_path)?)?;
                    *slot = Some(EvalResult {
                        job_id: id,
                        value,
                        wall_time: started.elapsed(),
                    });
                }
            }
            if results.iter().all(Option::is_some) {
                let mut out: Vec<EvalResult> = results.into_iter().flatten().collect();
                out.sort_by_key(|r| r.job_id);
                return Ok(out);
            }
            if started.elapsed() > timeout {
                let missing: Vec<u64> = results
                    .iter()
                    .zip(expected)
                    .filter(|(s, _)| s.is_none())
                    .map(|(_, &id)| id)
                    .collect();
                return Err(Error::CollectTimeout(missing));
            }
            std::thread::sleep(poll);
        }
    }
}

/// Evaluator backend over a [`FileQueue`]: submit the batch, poll for
/// results.
pub struct FileQueueEvaluator {
    queue: FileQueue,
    poll: Duration,
    timeout: Duration,
}

impl FileQueueEvaluator {
    pub fn new(queue: FileQueue, poll: Duration, timeout: Duration) -> Self {
        Self { queue, poll, timeout }
    }
}

impl Evaluator for FileQueueEvaluator {
    fn evaluate(&self, jobs: &[EvalJob]) -> Result<Vec<EvalResult>> {
        if jobs.is_empty() {
            return Ok(Vec::new());
        }
        self.queue.submit(jobs)?;
        let ids: Vec<u64> = jobs.iter().map(|j| j.job_id).collect();
        self.queue.collect(&ids, self.timeout, self.poll)
    }
}
