//! Objective functions behind one evaluatable contract.
//!
//! Everything is maximized. Benchmark costs (Rastrigin, sphere) are negated
//! so a single convention serves all engines; reported benchmark numbers are
//! costs, i.e. negated objective values.

pub mod fluids;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::bounds::{Bounds, ControlVector};
use crate::error::{Error, Result};
use crate::reservoir::{self, BhpLimits, ControlSchedule, RealizationParams};

use fluids::{npv, wcf, EconParams};

/// An evaluatable objective: pure, finite-valued, with declared bounds.
pub trait Objective: Send + Sync {
    fn id(&self) -> &str;
    fn bounds(&self) -> &Bounds;
    fn dim(&self) -> usize {
        self.bounds().dim()
    }
    fn evaluate(&self, x: &ControlVector) -> Result<f64>;
}

/// Evaluates and enforces the finite-value contract.
pub fn evaluate_checked(objective: &dyn Objective, x: &ControlVector) -> Result<f64> {
    if x.len() != objective.dim() {
        return Err(Error::DimensionMismatch {
            expected: objective.dim(),
            actual: x.len(),
        });
    }
    let value = objective.evaluate(x)?;
    if !value.is_finite() {
        return Err(Error::NonFinite {
            context: format!("objective {}", objective.id()),
            value,
        });
    }
    Ok(value)
}

/// Rastrigin cost: `10d + sum(x_i^2 - 10 cos(2 pi x_i))`. Zero at the origin,
/// nonnegative everywhere.
pub fn rastrigin_cost(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyInput("rastrigin input"));
    }
    let d = x.len() as f64;
    Ok(10.0 * d
        + x.iter()
            .map(|xi| xi * xi - 10.0 * (2.0 * PI * xi).cos())
            .sum::<f64>())
}

/// Sphere cost: `sum(x_i^2)`.
pub fn sphere_cost(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::EmptyInput("sphere input"));
    }
    Ok(x.iter().map(|xi| xi * xi).sum())
}

/// Maximizes the negated Rastrigin cost. Standard domain [-5.12, 5.12]^d.
pub struct RastriginObjective {
    id: String,
    bounds: Bounds,
}

impl RastriginObjective {
    pub fn new(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Ok(Self {
            id: format!("rastrigin:d={dim}"),
            bounds: Bounds::uniform(dim, lower, upper)?,
        })
    }

    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(dim, -5.12, 5.12)
    }
}

impl Objective for RastriginObjective {
    fn id(&self) -> &str {
        &self.id
    }
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }
    fn evaluate(&self, x: &ControlVector) -> Result<f64> {
        Ok(-rastrigin_cost(x.as_slice())?)
    }
}

/// Maximizes the negated sphere cost.
pub struct SphereObjective {
    id: String,
    bounds: Bounds,
}

impl SphereObjective {
    pub fn new(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Ok(Self {
            id: format!("sphere:d={dim}"),
            bounds: Bounds::uniform(dim, lower, upper)?,
        })
    }
}

impl Objective for SphereObjective {
    fn id(&self) -> &str {
        &self.id
    }
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }
    fn evaluate(&self, x: &ControlVector) -> Result<f64> {
        Ok(-sphere_cost(x.as_slice())?)
    }
}

/// Economic metric computed from a simulated fluid series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxyMetric {
    Wcf,
    Npv,
}

/// One realization of the waterflood proxy problem: 72 BHP controls to one
/// WCF or NPV value.
pub struct ProxyObjective {
    id: String,
    bounds: Bounds,
    limits: BhpLimits,
    params: RealizationParams,
    econ: EconParams,
    metric: ProxyMetric,
}

impl ProxyObjective {
    pub fn new(
        id: String,
        limits: BhpLimits,
        params: RealizationParams,
        econ: EconParams,
        metric: ProxyMetric,
    ) -> Result<Self> {
        params.validate()?;
        econ.validate()?;
        Ok(Self {
            id,
            bounds: limits.search_bounds()?,
            limits,
            params,
            econ,
            metric,
        })
    }
}

impl Objective for ProxyObjective {
    fn id(&self) -> &str {
        &self.id
    }
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }
    fn evaluate(&self, x: &ControlVector) -> Result<f64> {
        let schedule = ControlSchedule::from_control_vector(x)?;
        let series = reservoir::simulate(&schedule, &self.params, &self.limits)?;
        match self.metric {
            ProxyMetric::Wcf => wcf(&series.totals()),
            ProxyMetric::Npv => npv(&series, &self.econ),
        }
    }
}

/// Robust wrapper: arithmetic mean of the per-realization objectives. One
/// evaluation runs every underlying realization.
pub struct EnsembleMean {
    id: String,
    members: Vec<Arc<dyn Objective>>,
}

impl EnsembleMean {
    pub fn new(id: String, members: Vec<Arc<dyn Objective>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyInput("ensemble"));
        }
        let b = members[0].bounds().clone();
        for m in &members[1..] {
            if *m.bounds() != b {
                return Err(Error::InvalidArgument(
                    "ensemble members must share bounds".into(),
                ));
            }
        }
        Ok(Self { id, members })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

impl Objective for EnsembleMean {
    fn id(&self) -> &str {
        &self.id
    }
    fn bounds(&self) -> &Bounds {
        self.members[0].bounds()
    }
    fn evaluate(&self, x: &ControlVector) -> Result<f64> {
        let mut sum = 0.0;
        for m in &self.members {
            sum += evaluate_checked(m.as_ref(), x)?;
        }
        Ok(sum / self.members.len() as f64)
    }
}

/// Objectives addressable by id, as used by file-queue workers.
#[derive(Default)]
pub struct ObjectiveRegistry {
    map: BTreeMap<String, Arc<dyn Objective>>,
}

impl ObjectiveRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, objective: Arc<dyn Objective>) {
        self.map.insert(objective.id().to_string(), objective);
    }

    pub fn get(&self, id: &str) -> Result<Arc<dyn Objective>> {
        self.map
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownObjective(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }
}
