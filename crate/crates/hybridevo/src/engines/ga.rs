//! Real-coded genetic algorithm: tournament selection, BLX-alpha crossover,
//! per-gene Gaussian mutation, elitism.

use serde::{Deserialize, Serialize};

use crate::bounds::{clip, Bounds, ControlVector};
use crate::error::{Error, Result};
use crate::population::{Individual, Population};
use crate::rng::RngStream;

use super::{random_points, scheduled, Engine, EngineFactory, EngineInit, EngineSnapshot};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaConfig {
    pub tournament_size: usize,
    pub crossover_prob: f64,
    pub crossover_alpha: f64,
    /// Defaults to `1 / dimension` when unset.
    pub mutation_prob_per_gene: Option<f64>,
    /// Mutation step as a fraction of each dimension's range.
    pub mutation_sigma: f64,
    /// Optional linear schedule target for `mutation_sigma`; off by default.
    pub mutation_sigma_final: Option<f64>,
    pub elitism_count: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            tournament_size: 3,
            crossover_prob: 0.9,
            crossover_alpha: 0.5,
            mutation_prob_per_gene: None,
            mutation_sigma: 0.1,
            mutation_sigma_final: Some(0.01),
            elitism_count: 1,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tournament_size < 1 {
            return Err(Error::InvalidArgument("ga.tournament_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(Error::InvalidArgument("ga.crossover_prob must be in [0, 1]".into()));
        }
        if let Some(p) = self.mutation_prob_per_gene {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(
                    "ga.mutation_prob_per_gene must be in [0, 1]".into(),
                ));
            }
        }
        if self.crossover_alpha < 0.0 || self.mutation_sigma < 0.0 {
            return Err(Error::InvalidArgument(
                "ga.crossover_alpha and ga.mutation_sigma must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Winner of a tournament: argmax value among the drawn indices.
fn tournament_pick(values: &[f64], candidates: &[usize]) -> usize {
    *candidates
        .iter()
        .max_by(|&&a, &&b| values[a].total_cmp(&values[b]))
        .expect("tournament candidates nonempty")
}

/// BLX-alpha blend of one gene: uniform draw `u` over
/// `[min - alpha*|p1-p2|, max + alpha*|p1-p2|]`.
fn blx_gene(p1: f64, p2: f64, alpha: f64, u: f64) -> f64 {
    let spread = (p1 - p2).abs();
    let lo = p1.min(p2) - alpha * spread;
    let hi = p1.max(p2) + alpha * spread;
    lo + u * (hi - lo)
}

fn mutate_gene(x: f64, z: f64, sigma: f64, range: f64) -> f64 {
    x + z * sigma * range
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaEngine {
    cfg: GaConfig,
    bounds: Bounds,
    rng: RngStream,
    population: Population,
    best: Option<Individual>,
    awaiting_tell: bool,
    generation: usize,
    planned_generations: usize,
    mutation_prob: f64,
}

impl GaEngine {
    pub fn new(init: EngineInit) -> Result<Self> {
        init.params.ga.validate()?;
        let cfg = init.params.ga.clone();
        if cfg.elitism_count >= init.population_size {
            return Err(Error::InvalidArgument(
                "ga.elitism_count must be below the population size".into(),
            ));
        }
        let mut rng = init.rng;
        let members = match init.seed_population {
            // Handoff points are re-evaluated as this stage's first
            // generation, so values are dropped here.
            Some(pop) => {
                if pop.size() != init.population_size {
                    return Err(Error::InvalidArgument(format!(
                        "handoff population of {} does not match stage population {}",
                        pop.size(),
                        init.population_size
                    )));
                }
                pop.members
                    .iter()
                    .map(|m| Individual::unevaluated(m.x.clone()))
                    .collect()
            }
            None => random_points(init.bounds, init.population_size, &mut rng)
                .into_iter()
                .map(Individual::unevaluated)
                .collect(),
        };
        let mutation_prob = cfg
            .mutation_prob_per_gene
            .unwrap_or(1.0 / init.bounds.dim() as f64);
        Ok(Self {
            cfg,
            bounds: init.bounds.clone(),
            rng,
            population: Population::new(members, 0)?,
            best: None,
            awaiting_tell: false,
            generation: 0,
            planned_generations: init.generations,
            mutation_prob,
        })
    }

    fn tournament(&mut self, values: &[f64]) -> usize {
        let candidates: Vec<usize> = (0..self.cfg.tournament_size)
            .map(|_| self.rng.index(values.len()))
            .collect();
        tournament_pick(values, &candidates)
    }

    fn breed(&mut self) -> Result<Vec<Individual>> {
        let values: Vec<f64> = self
            .population
            .members
            .iter()
            .map(|m| m.value().ok_or(Error::NotEvaluated))
            .collect::<Result<_>>()?;
        let sigma = scheduled(
            self.cfg.mutation_sigma,
            self.cfg.mutation_sigma_final,
            self.generation,
            self.planned_generations,
        );
        let ranked = self.population.ranked_indices()?;
        let mut next: Vec<Individual> = ranked
            .iter()
            .take(self.cfg.elitism_count)
            .map(|&i| Individual::unevaluated(self.population.members[i].x.clone()))
            .collect();
        while next.len() < self.population.size() {
            let i1 = self.tournament(&values);
            let i2 = self.tournament(&values);
            let p1 = self.population.members[i1].x.clone();
            let p2 = self.population.members[i2].x.clone();
            let crossed = self.rng.uniform() < self.cfg.crossover_prob;
            let mut genes: Vec<f64> = (0..self.bounds.dim())
                .map(|i| {
                    if crossed {
                        let u = self.rng.uniform();
                        blx_gene(p1.as_slice()[i], p2.as_slice()[i], self.cfg.crossover_alpha, u)
                    } else {
                        p1.as_slice()[i]
                    }
                })
                .collect();
            for (i, g) in genes.iter_mut().enumerate() {
                if self.rng.uniform() < self.mutation_prob {
                    let z = self.rng.normal();
                    *g = mutate_gene(*g, z, sigma, self.bounds.range(i));
                }
            }
            let child = clip(&ControlVector::new(genes), &self.bounds)?;
            next.push(Individual::unevaluated(child));
        }
        Ok(next)
    }
}

impl Engine for GaEngine {
    fn name(&self) -> &'static str {
        "ga"
    }

    fn ask(&mut self) -> Result<Vec<ControlVector>> {
        if self.awaiting_tell {
            return Err(Error::InvalidArgument("ask called before tell".into()));
        }
        if self.population.all_evaluated() {
            let next = self.breed()?;
            self.population = Population::new(next, self.generation)?;
        }
        self.awaiting_tell = true;
        Ok(self.population.members.iter().map(|m| m.x.clone()).collect())
    }

    fn tell(&mut self, values: &[f64]) -> Result<()> {
        if !self.awaiting_tell {
            return Err(Error::InvalidArgument("tell without a pending ask".into()));
        }
        if values.len() != self.population.size() {
            return Err(Error::DimensionMismatch {
                expected: self.population.size(),
                actual: values.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "ga tell".into(),
                value: bad,
            });
        }
        for (m, &v) in self.population.members.iter_mut().zip(values) {
            m.set_value(v)?;
        }
        if let Some(gen_best) = self.population.best() {
            let improves = self
                .best
                .as_ref()
                .map_or(true, |b| gen_best.value() > b.value());
            if improves {
                self.best = Some(gen_best.clone());
            }
        }
        self.generation += 1;
        self.awaiting_tell = false;
        Ok(())
    }

    fn best(&self) -> Result<Individual> {
        self.best.clone().ok_or(Error::NotEvaluated)
    }

    fn population(&self) -> Result<Population> {
        if !self.population.all_evaluated() {
            return Err(Error::NotEvaluated);
        }
        Ok(self.population.clone())
    }

    fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot::Ga(self.clone())
    }
}

pub struct GaFactory;

impl EngineFactory for GaFactory {
    fn name(&self) -> &'static str {
        "ga"
    }
    fn create(&self, init: EngineInit) -> Result<Box<dyn Engine>> {
        Ok(Box::new(GaEngine::new(init)?))
    }
}
