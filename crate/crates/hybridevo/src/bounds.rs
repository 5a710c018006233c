//! Box-constrained search space: per-dimension bounds and control vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension box constraints of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidBounds("dimension must be >= 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidBounds(format!(
                "lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidBounds(format!(
                    "dimension {i}: require finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Uniform bounds `[lo, hi]` replicated over `dim` dimensions.
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn range(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn max_range(&self) -> f64 {
        (0..self.dim()).map(|i| self.range(i)).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &ControlVector) -> bool {
        x.len() == self.dim()
            && x.as_slice()
                .iter()
                .enumerate()
                .all(|(i, v)| *v >= self.lower[i] && *v <= self.upper[i])
    }
}

/// A point in the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlVector(Vec<f64>);

impl ControlVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ControlVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Clamps `x` component-wise into `bounds`. Interior components are unchanged.
pub fn clip(x: &ControlVector, bounds: &Bounds) -> Result<ControlVector> {
    if x.len() != bounds.dim() {
        return Err(Error::DimensionMismatch {
            expected: bounds.dim(),
            actual: x.len(),
        });
    }
    let values = x
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, v)| v.clamp(bounds.lower()[i], bounds.upper()[i]))
        .collect();
    Ok(ControlVector::new(values))
}
