//! Multi-stage orchestration: runs engines in sequence, hands the final
//! population of one stage to the next, enforces the evaluation budget, and
//! keeps the run ledger. Checkpoints are written at generation boundaries so
//! a resumed run reproduces the uninterrupted history exactly.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engines::{Engine, EngineInit, EngineParams, EngineRegistry, EngineSnapshot};
use crate::error::{Error, Result};
use crate::history::RunHistory;
use crate::objectives::Objective;
use crate::parallel::{EvalJob, Evaluator};
use crate::population::{Individual, Population};
use crate::rng::RngStream;

const CHECKPOINT_VERSION: u32 = 1;

/// One optimization stage: which engine, for how long, with what population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePlan {
    pub engine: String,
    pub generations: usize,
    pub population_size: usize,
}

impl StagePlan {
    pub fn budget(&self) -> usize {
        self.generations * self.population_size
    }
}

/// An ordered list of stages over one objective.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationPlan {
    pub stages: Vec<StagePlan>,
    pub seed: u64,
    pub engine_params: EngineParams,
}

impl OptimizationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidConfig("plan has no stages".into()));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if s.generations < 1 || s.population_size < 1 {
                return Err(Error::InvalidConfig(format!(
                    "stage {}: generations and population must be >= 1",
                    i + 1
                )));
            }
        }
        self.engine_params.validate()
    }

    /// Total evaluations the plan will consume.
    pub fn budget(&self) -> usize {
        self.stages.iter().map(StagePlan::budget).sum()
    }

    pub fn stage_label(&self, stage_idx: usize) -> String {
        format!("s{}_{}", stage_idx + 1, self.stages[stage_idx].engine)
    }
}

/// Resumable run state, serialized at generation boundaries.
#[derive(Serialize, Deserialize)]
struct RunState {
    version: u32,
    plan_fingerprint: String,
    stage_idx: usize,
    gens_done: usize,
    engine: Option<EngineSnapshot>,
    handoff: Option<Population>,
    best: Option<Individual>,
    history: RunHistory,
}

fn plan_fingerprint(plan: &OptimizationPlan, objective_id: &str) -> String {
    let stages: Vec<String> = plan
        .stages
        .iter()
        .map(|s| format!("{}x{}x{}", s.engine, s.generations, s.population_size))
        .collect();
    format!("{objective_id};seed={};{}", plan.seed, stages.join("|"))
}

/// Writes a checkpoint atomically next to `path`.
fn write_checkpoint(path: &Path, state: &RunState) -> Result<()> {
    let json = serde_json::to_string(state)
        .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, json)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_checkpoint(path: &Path, expected_fingerprint: &str) -> Result<RunState> {
    if !path.exists() {
        return Err(Error::Checkpoint(format!(
            "checkpoint file {} does not exist",
            path.display()
        )));
    }
    let json = std::fs::read_to_string(path)?;
    let state: RunState = serde_json::from_str(&json)
        .map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))?;
    if state.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "checkpoint version {} does not match expected {CHECKPOINT_VERSION}",
            state.version
        )));
    }
    if state.plan_fingerprint != expected_fingerprint {
        return Err(Error::Checkpoint(format!(
            "checkpoint belongs to a different run: '{}' vs '{}'",
            state.plan_fingerprint, expected_fingerprint
        )));
    }
    Ok(state)
}

/// Orchestrates one optimization run.
pub struct Runner<'a> {
    pub plan: &'a OptimizationPlan,
    pub objective: Arc<dyn Objective>,
    pub evaluator: &'a dyn Evaluator,
    pub registry: &'a EngineRegistry,
    /// Checkpoint file, written after every generation when set.
    pub checkpoint_path: Option<PathBuf>,
}

impl<'a> Runner<'a> {
    /// Runs the plan from the start. `history` is filled in place so partial
    /// progress survives an evaluator failure.
    pub fn run(&self, history: &mut RunHistory) -> Result<Individual> {
        self.plan.validate()?;
        self.execute(history, 0, 0, None, None, None)
    }

    /// Resumes from the checkpoint written by a previous run.
    pub fn resume(&self, history: &mut RunHistory) -> Result<Individual> {
        self.plan.validate()?;
        let path = self
            .checkpoint_path
            .as_deref()
            .ok_or_else(|| Error::Checkpoint("no checkpoint path configured".into()))?;
        let fingerprint = plan_fingerprint(self.plan, self.objective.id());
        let state = read_checkpoint(path, &fingerprint)?;
        *history = state.history;
        self.execute(
            history,
            state.stage_idx,
            state.gens_done,
            state.engine.map(EngineSnapshot::into_engine),
            state.handoff,
            state.best,
        )
    }

    fn execute(
        &self,
        history: &mut RunHistory,
        mut stage_idx: usize,
        mut gens_done: usize,
        mut engine: Option<Box<dyn Engine>>,
        mut handoff: Option<Population>,
        mut best: Option<Individual>,
    ) -> Result<Individual> {
        let plan = self.plan;
        let fingerprint = plan_fingerprint(plan, self.objective.id());
        let master = RngStream::new(plan.seed);

        while stage_idx < plan.stages.len() {
            let stage = &plan.stages[stage_idx];
            let label = plan.stage_label(stage_idx);
            if engine.is_none() {
                let init = EngineInit {
                    bounds: self.objective.bounds(),
                    population_size: stage.population_size,
                    generations: stage.generations,
                    rng: master.fork(&label),
                    seed_population: handoff.as_ref(),
                    params: &plan.engine_params,
                };
                engine = Some(self.registry.create(&stage.engine, init)?);
            }
            let eng = engine.as_mut().expect("engine constructed above");

            while gens_done < stage.generations {
                let candidates = eng.ask()?;
                let jobs: Vec<EvalJob> = candidates
                    .iter()
                    .enumerate()
                    .map(|(i, x)| EvalJob {
                        job_id: history.len() as u64 + 1 + i as u64,
                        x: x.clone(),
                        objective_id: self.objective.id().to_string(),
                    })
                    .collect();
                let results = self.evaluator.evaluate(&jobs)?;
                let values: Vec<f64> = results.iter().map(|r| r.value).collect();
                for v in &values {
                    history.record(&label, gens_done, *v)?;
                }
                eng.tell(&values)?;
                gens_done += 1;

                if let Some(path) = &self.checkpoint_path {
                    write_checkpoint(
                        path,
                        &RunState {
                            version: CHECKPOINT_VERSION,
                            plan_fingerprint: fingerprint.clone(),
                            stage_idx,
                            gens_done,
                            engine: Some(eng.snapshot()),
                            handoff: None,
                            best: best.clone(),
                            history: history.clone(),
                        },
                    )?;
                }
            }

            let stage_best = eng.best()?;
            let improves = best
                .as_ref()
                .map_or(true, |b| stage_best.value() > b.value());
            if improves {
                best = Some(stage_best);
            }
            handoff = Some(eng.population()?);
            engine = None;
            stage_idx += 1;
            gens_done = 0;

            if let Some(path) = &self.checkpoint_path {
                write_checkpoint(
                    path,
                    &RunState {
                        version: CHECKPOINT_VERSION,
                        plan_fingerprint: fingerprint.clone(),
                        stage_idx,
                        gens_done,
                        engine: None,
                        handoff: handoff.clone(),
                        best: best.clone(),
                        history: history.clone(),
                    },
                )?;
            }
        }

        best.ok_or(Error::NotEvaluated)
    }
}
