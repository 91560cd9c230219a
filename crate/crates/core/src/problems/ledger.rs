use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Evaluation;
use crate::error::{Error, Result};

/// One charged evaluation. `segment` is the 1-based segment id, or `None`
/// for a full-chain evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub index: usize,
    pub segment: Option<usize>,
    pub cost: f64,
    pub cumulative_cost: f64,
    pub fitness: f64,
    /// Running maximum of `fitness` within this record's segment stream.
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    spent: f64,
    cap: f64,
    records: Vec<EvalRecord>,
    #[serde(skip)]
    best: BTreeMap<Option<usize>, f64>,
}

impl BudgetLedger {
    pub fn new(cap: f64) -> Result<Self> {
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "budget cap must be positive, got {cap}"
            )));
        }
        Ok(Self {
            spent: 0.0,
            cap,
            records: Vec::new(),
            best: BTreeMap::new(),
        })
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn remaining(&self) -> f64 {
        (self.cap - self.spent).max(0.0)
    }

    /// No new evaluation may be issued once this is true.
    pub fn exhausted(&self) -> bool {
        self.spent >= self.cap
    }

    pub fn records(&self) -> &[EvalRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&mut self, segment: Option<usize>, eval: Evaluation) -> &EvalRecord {
        self.spent += eval.cost;
        let best = self
            .best
            .entry(segment)
            .and_modify(|b| *b = b.max(eval.fitness))
            .or_insert(eval.fitness);
        let record = EvalRecord {
            index: self.records.len(),
            segment,
            cost: eval.cost,
            cumulative_cost: self.spent,
            fitness: eval.fitness,
            best_so_far: *best,
        };
        self.records.push(record);
        self.records.last().expect("just pushed")
    }

    /// Best fitness among full-chain evaluations.
    pub fn best_full(&self) -> Option<f64> {
        self.best.get(&None).copied()
    }

    /// Recompute totals and running maxima from the log alone and compare.
    pub fn verify(&self) -> bool {
        let mut spent = 0.0;
        let mut best: BTreeMap<Option<usize>, f64> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            spent += r.cost;
            let b = best
                .entry(r.segment)
                .and_modify(|b| *b = b.max(r.fitness))
                .or_insert(r.fitness);
            if r.index != i || r.cumulative_cost != spent || r.best_so_far != *b {
                return false;
            }
        }
        spent == self.spent
    }
}
