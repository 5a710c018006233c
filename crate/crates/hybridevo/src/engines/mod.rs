//! Population engines behind one ask/tell contract.
//!
//! Each algorithm variant (GA, PSO, CMA-ES) implements [`Engine`] and is
//! registered by name in an [`EngineRegistry`], so the orchestrator and the
//! CLI select engines at runtime from config. `ask` proposes one batch of
//! candidates (already clipped to bounds), `tell` feeds back their objective
//! values. One ask/tell cycle is one generation and costs exactly
//! `population_size` evaluations, for every engine.

pub mod cmaes;
pub mod ga;
pub mod pso;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::{Bounds, ControlVector};
use crate::error::{Error, Result};
use crate::population::{Individual, Population};
use crate::rng::RngStream;

pub use cmaes::{CmaConfig, CmaEngine};
pub use ga::{GaConfig, GaEngine};
pub use pso::{PsoConfig, PsoEngine};

/// All engine hyperparameters, as configured for one run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EngineParams {
    pub ga: GaConfig,
    pub pso: PsoConfig,
    pub cmaes: CmaConfig,
}

impl EngineParams {
    pub fn validate(&self) -> Result<()> {
        self.ga.validate()?;
        self.pso.validate()?;
        self.cmaes.validate()
    }
}

/// Everything needed to construct an engine for one stage.
pub struct EngineInit<'a> {
    pub bounds: &'a Bounds,
    pub population_size: usize,
    /// Planned generations for this stage; drives optional hyperparameter
    /// schedules.
    pub generations: usize,
    pub rng: RngStream,
    /// Final evaluated population of the previous stage, if any.
    pub seed_population: Option<&'a Population>,
    pub params: &'a EngineParams,
}

/// Ask/tell stepping contract shared by all engines.
pub trait Engine: Send {
    fn name(&self) -> &'static str;

    /// Proposes the next batch of candidates, clipped to bounds.
    fn ask(&mut self) -> Result<Vec<ControlVector>>;

    /// Feeds back one value per candidate of the matching `ask`.
    fn tell(&mut self, values: &[f64]) -> Result<()>;

    /// Best individual observed by this engine so far.
    fn best(&self) -> Result<Individual>;

    /// Last fully evaluated population, the handoff payload.
    fn population(&self) -> Result<Population>;

    fn snapshot(&self) -> EngineSnapshot;
}

/// Serializable engine state for checkpointing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EngineSnapshot {
    Ga(GaEngine),
    Pso(PsoEngine),
    Cma(CmaEngine),
}

impl EngineSnapshot {
    pub fn into_engine(self) -> Box<dyn Engine> {
        match self {
            EngineSnapshot::Ga(e) => Box::new(e),
            EngineSnapshot::Pso(e) => Box::new(e),
            EngineSnapshot::Cma(e) => Box::new(e),
        }
    }
}

/// Builds an engine from stage configuration.
pub trait EngineFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn create(&self, init: EngineInit) -> Result<Box<dyn Engine>>;
}

/// Name-indexed registry of engine factories.
pub struct EngineRegistry {
    factories: BTreeMap<&'static str, Box<dyn EngineFactory>>,
}

impl EngineRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry with the three built-in engines: `ga`, `pso`, `cmaes`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(ga::GaFactory));
        reg.register(Box::new(pso::PsoFactory));
        reg.register(Box::new(cmaes::CmaFactory));
        reg
    }

    pub fn register(&mut self, factory: Box<dyn EngineFactory>) {
        self.factories.insert(factory.name(), factory);
    }

    pub fn create(&self, name: &str, init: EngineInit) -> Result<Box<dyn Engine>> {
        self.factories
            .get(name)
            .ok_or_else(|| Error::UnknownEngine(name.to_string()))?
            .create(init)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }
}

/// Linear schedule between `start` and `finish` over `generations` steps;
/// identity when `finish` is unset or the stage has a single generation.
pub(crate) fn scheduled(start: f64, finish: Option<f64>, gen: usize, generations: usize) -> f64 {
    match finish {
        Some(f) if generations > 1 => {
            let t = (gen.min(generations - 1)) as f64 / (generations - 1) as f64;
            start + (f - start) * t
        }
        _ => start,
    }
}

/// Uniform random population inside bounds.
pub(crate) fn random_points(bounds: &Bounds, n: usize, rng: &mut RngStream) -> Vec<ControlVector> {
    (0..n)
        .map(|_| {
            ControlVector::new(
                (0..bounds.dim())
                    .map(|i| rng.uniform_in(bounds.lower()[i], bounds.upper()[i]))
                    .collect(),
            )
        })
        .collect()
}
