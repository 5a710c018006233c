//! Append-only run ledger: one record per objective evaluation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub eval_index: u64,
    pub stage: String,
    pub generation: usize,
    pub value: f64,
    pub best_so_far: f64,
}

/// Every evaluation of a run, in order. `best_so_far` is monotone
/// nondecreasing under the crate-wide maximization convention.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    records: Vec<EvalRecord>,
}

impl RunHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn best_so_far(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_so_far)
    }

    /// Appends one evaluation. Rejects non-finite values.
    pub fn record(&mut self, stage: &str, generation: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: "history value".into(),
                value,
            });
        }
        let best = match self.best_so_far() {
            Some(b) => b.max(value),
            None => value,
        };
        self.records.push(EvalRecord {
            eval_index: self.records.len() as u64 + 1,
            stage: stage.to_string(),
            generation,
            value,
            best_so_far: best,
        });
        Ok(())
    }

    /// CSV export: header plus one row per evaluation, values at 15
    /// significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eval_index,stage,generation,value,best_so_far")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{:.14e},{:.14e}",
                r.eval_index, r.stage, r.generation, r.value, r.best_so_far
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
