//! Fluid accounting and the two economic objectives: weighted cumulative
//! fluid (WCF) and discounted net present value (NPV).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WCF_WATER_WEIGHT: f64 = 0.1;

/// Cumulative volumes over a whole run, in barrels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidTotals {
    pub oil_produced: f64,
    pub water_produced: f64,
    pub water_injected: f64,
}

impl FluidTotals {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("oil_produced", self.oil_produced),
            ("water_produced", self.water_produced),
            ("water_injected", self.water_injected),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "fluid total {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-interval volumes for one reporting interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FluidVolumes {
    pub oil_produced: f64,
    pub water_produced: f64,
    pub water_injected: f64,
}

/// Volumes per reporting interval; interval 1 is undiscounted in NPV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidSeries {
    intervals: Vec<FluidVolumes>,
}

impl FluidSeries {
    pub fn new(intervals: Vec<FluidVolumes>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::EmptyInput("fluid series"));
        }
        for (i, iv) in intervals.iter().enumerate() {
            for (name, v) in [
                ("oil_produced", iv.oil_produced),
                ("water_produced", iv.water_produced),
                ("water_injected", iv.water_injected),
            ] {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "interval {i}: {name} must be finite and >= 0, got {v}"
                    )));
                }
            }
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[FluidVolumes] {
        &self.intervals
    }

    pub fn totals(&self) -> FluidTotals {
        let mut t = FluidTotals {
            oil_produced: 0.0,
            water_produced: 0.0,
            water_injected: 0.0,
        };
        for iv in &self.intervals {
            t.oil_produced += iv.oil_produced;
            t.water_produced += iv.water_produced;
            t.water_injected += iv.water_injected;
        }
        t
    }
}

/// Prices and discount factors per fluid. Cost fluids (produced water,
/// injected water) carry negative prices so one formula covers revenue and
/// cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconParams {
    pub oil_price: f64,
    pub water_prod_cost: f64,
    pub water_inj_cost: f64,
    pub discount_oil: f64,
    pub discount_water_prod: f64,
    pub discount_water_inj: f64,
}

impl EconParams {
    /// Defaults: oil $40/bbl, produced water -$4/bbl, injected water -$2/bbl,
    /// 0.08 discount for all fluids.
    pub fn default_params() -> Self {
        Self::with_uniform_discount(40.0, -4.0, -2.0, 0.08)
    }

    pub fn with_uniform_discount(
        oil_price: f64,
        water_prod_cost: f64,
        water_inj_cost: f64,
        discount: f64,
    ) -> Self {
        Self {
            oil_price,
            water_prod_cost,
            water_inj_cost,
            discount_oil: discount,
            discount_water_prod: discount,
            discount_water_inj: discount,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, d) in [
            ("discount_oil", self.discount_oil),
            ("discount_water_prod", self.discount_water_prod),
            ("discount_water_inj", self.discount_water_inj),
        ] {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and >= 0, got {d}"
                )));
            }
        }
        Ok(())
    }
}

/// Weighted cumulative fluid: oil produced minus 0.1 x (water produced +
/// water injected).
pub fn wcf(t: &FluidTotals) -> Result<f64> {
    t.validate()?;
    Ok(t.oil_produced - WCF_WATER_WEIGHT * (t.water_produced + t.water_injected))
}

/// Discounted cash flow over fluids and intervals: per fluid f and interval
/// tau, `Q * C_f / (1 + d_f)^(tau - 1)`. The first interval is undiscounted.
pub fn npv(series: &FluidSeries, econ: &EconParams) -> Result<f64> {
    econ.validate()?;
    let mut total = 0.0;
    for (i, iv) in series.intervals().iter().enumerate() {
        let tau = i as i32; // tau - 1 with 1-based tau
        total += iv.oil_produced * econ.oil_price / (1.0 + econ.discount_oil).powi(tau);
        total +=
            iv.water_produced * econ.water_prod_cost / (1.0 + econ.discount_water_prod).powi(tau);
        total +=
            iv.water_injected * econ.water_inj_cost / (1.0 + econ.discount_water_inj).powi(tau);
    }
    Ok(total)
}
