//! Individuals and populations: the unit of exchange between engines.

use serde::{Deserialize, Serialize};

use crate::bounds::ControlVector;
use crate::error::{Error, Result};

/// A control vector paired with its objective value, if evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub x: ControlVector,
    value: Option<f64>,
}

impl Individual {
    pub fn unevaluated(x: ControlVector) -> Self {
        Self { x, value: None }
    }

    pub fn evaluated(x: ControlVector, value: f64) -> Result<Self> {
        let mut ind = Self::unevaluated(x);
        ind.set_value(value)?;
        Ok(ind)
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    /// Non-finite values never enter a population.
    pub fn set_value(&mut self, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: "individual value".into(),
                value,
            });
        }
        self.value = Some(value);
        Ok(())
    }
}

/// An ordered, fixed-size set of individuals sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<Individual>,
    pub generation: usize,
}

impl Population {
    pub fn new(members: Vec<Individual>, generation: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyInput("population"));
        }
        let d = members[0].x.len();
        for m in &members {
            if m.x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: m.x.len(),
                });
            }
        }
        Ok(Self {
            members,
            generation,
        })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn dim(&self) -> usize {
        self.members[0].x.len()
    }

    pub fn all_evaluated(&self) -> bool {
        self.members.iter().all(|m| m.value().is_some())
    }

    /// Best member by value (maximization). `None` if nothing is evaluated.
    pub fn best(&self) -> Option<&Individual> {
        self.members
            .iter()
            .filter(|m| m.value().is_some())
            .max_by(|a, b| a.value().unwrap().total_cmp(&b.value().unwrap()))
    }

    /// Member indices sorted by descending value. Requires full evaluation.
    pub fn ranked_indices(&self) -> Result<Vec<usize>> {
        if !self.all_evaluated() {
            return Err(Error::NotEvaluated);
        }
        let mut idx: Vec<usize> = (0..self.size()).collect();
        idx.sort_by(|&a, &b| {
            self.members[b]
                .value()
                .unwrap()
                .total_cmp(&self.members[a].value().unwrap())
        });
        Ok(idx)
    }
}
