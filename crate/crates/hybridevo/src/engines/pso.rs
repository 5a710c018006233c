//! Particle swarm optimization, global-best topology with inertia weight and
//! velocity clamping.

use serde::{Deserialize, Serialize};

use crate::bounds::{clip, Bounds, ControlVector};
use crate::error::{Error, Result};
use crate::population::{Individual, Population};
use crate::rng::RngStream;

use super::{random_points, scheduled, Engine, EngineFactory, EngineInit, EngineSnapshot};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoConfig {
    pub inertia: f64,
    /// Optional linear schedule target for the inertia weight; off by default.
    pub inertia_final: Option<f64>,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity clamp as a fraction of each dimension's range.
    pub velocity_clamp: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            inertia: 0.7,
            inertia_final: None,
            cognitive: 1.5,
            social: 1.5,
            velocity_clamp: 0.5,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pso.inertia", self.inertia),
            ("pso.cognitive", self.cognitive),
            ("pso.social", self.social),
            ("pso.velocity_clamp", self.velocity_clamp),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if let Some(f) = self.inertia_final {
            if !f.is_finite() || f < 0.0 {
                return Err(Error::InvalidArgument(
                    "pso.inertia_final must be finite and >= 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One velocity component: inertia plus cognitive and social pulls.
fn velocity_update(
    w: f64,
    v: f64,
    c1: f64,
    r1: f64,
    to_pbest: f64,
    c2: f64,
    r2: f64,
    to_gbest: f64,
) -> f64 {
    w * v + c1 * r1 * to_pbest + c2 * r2 * to_gbest
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoEngine {
    cfg: PsoConfig,
    bounds: Bounds,
    rng: RngStream,
    positions: Vec<ControlVector>,
    velocities: Vec<Vec<f64>>,
    /// Per-particle personal bests; empty until the first tell.
    personal_best: Vec<Individual>,
    global_best: Option<Individual>,
    last_evaluated: Option<Population>,
    awaiting_tell: bool,
    generation: usize,
    planned_generations: usize,
}

impl PsoEngine {
    pub fn new(init: EngineInit) -> Result<Self> {
        init.params.pso.validate()?;
        let mut rng = init.rng;
        let positions = match init.seed_population {
            Some(pop) => {
                if pop.size() != init.population_size {
                    return Err(Error::InvalidArgument(format!(
                        "handoff population of {} does not match stage population {}",
                        pop.size(),
                        init.population_size
                    )));
                }
                pop.members.iter().map(|m| m.x.clone()).collect()
            }
            None => random_points(init.bounds, init.population_size, &mut rng),
        };
        let dim = init.bounds.dim();
        Ok(Self {
            cfg: init.params.pso.clone(),
            bounds: init.bounds.clone(),
            rng,
            velocities: vec![vec![0.0; dim]; positions.len()],
            positions,
            personal_best: Vec::new(),
            global_best: None,
            last_evaluated: None,
            awaiting_tell: false,
            generation: 0,
            planned_generations: init.generations,
        })
    }

    fn advance(&mut self) -> Result<()> {
        let w = scheduled(
            self.cfg.inertia,
            self.cfg.inertia_final,
            self.generation,
            self.planned_generations,
        );
        let gbest = self
            .global_best
            .as_ref()
            .ok_or(Error::NotEvaluated)?
            .x
            .clone();
        for (p, (pos, vel)) in self
            .positions
            .iter_mut()
            .zip(&mut self.velocities)
            .enumerate()
        {
            let pbest = &self.personal_best[p].x;
            let mut moved = Vec::with_capacity(self.bounds.dim());
            for i in 0..self.bounds.dim() {
                let r1 = self.rng.uniform();
                let r2 = self.rng.uniform();
                let mut v = velocity_update(
                    w,
                    vel[i],
                    self.cfg.cognitive,
                    r1,
                    pbest.as_slice()[i] - pos.as_slice()[i],
                    self.cfg.social,
                    r2,
                    gbest.as_slice()[i] - pos.as_slice()[i],
                );
                let vmax = self.cfg.velocity_clamp * self.bounds.range(i);
                v = v.clamp(-vmax, vmax);
                vel[i] = v;
                moved.push(pos.as_slice()[i] + v);
            }
            *pos = clip(&ControlVector::new(moved), &self.bounds)?;
        }
        Ok(())
    }
}

impl Engine for PsoEngine {
    fn name(&self) -> &'static str {
        "pso"
    }

    fn ask(&mut self) -> Result<Vec<ControlVector>> {
        if self.awaiting_tell {
            return Err(Error::InvalidArgument("ask called before tell".into()));
        }
        // The first batch evaluates the initial (or handoff) positions;
        // moves happen only once bests exist.
        if self.global_best.is_some() {
            self.advance()?;
        }
        self.awaiting_tell = true;
        Ok(self.positions.clone())
    }

    fn tell(&mut self, values: &[f64]) -> Result<()> {
        if !self.awaiting_tell {
            return Err(Error::InvalidArgument("tell without a pending ask".into()));
        }
        if values.len() != self.positions.len() {
            return Err(Error::DimensionMismatch {
                expected: self.positions.len(),
                actual: values.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "pso tell".into(),
                value: bad,
            });
        }
        let evaluated: Vec<Individual> = self
            .positions
            .iter()
            .zip(values)
            .map(|(x, &v)| Individual::evaluated(x.clone(), v))
            .collect::<Result<_>>()?;
        if self.personal_best.is_empty() {
            self.personal_best = evaluated.clone();
        } else {
            for (pb, cur) in self.personal_best.iter_mut().zip(&evaluated) {
                if cur.value() > pb.value() {
                    *pb = cur.clone();
                }
            }
        }
        for pb in &self.personal_best {
            let improves = self
                .global_best
                .as_ref()
                .map_or(true, |g| pb.value() > g.value());
            if improves {
                self.global_best = Some(pb.clone());
            }
        }
        self.last_evaluated = Some(Population::new(evaluated, self.generation)?);
        self.generation += 1;
        self.awaiting_tell = false;
        Ok(())
    }

    fn best(&self) -> Result<Individual> {
        self.global_best.clone().ok_or(Error::NotEvaluated)
    }

    fn population(&self) -> Result<Population> {
        self.last_evaluated.clone().ok_or(Error::NotEvaluated)
    }

    fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot::Pso(self.clone())
    }
}

pub struct PsoFactory;

impl EngineFactory for PsoFactory {
    fn name(&self) -> &'static str {
        "pso"
    }
    fn create(&self, init: EngineInit) -> Result<Box<dyn Engine>> {
        Ok(Box::new(PsoEngine::new(init)?))
    }
}
