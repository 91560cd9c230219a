//! Evolutionary optimizers that search surrogate models over integer codes.

mod ga;
mod knee;
mod nsga2;
mod operators;

use serde::{Deserialize, Serialize};

use crate::space::SubVector;

pub use ga::{ga_optimize, ga_optimize_excluding};
pub use knee::{knee_index, knee_point};
pub use nsga2::{
    crowding_distance, dominates, non_dominated_sort, nsga2_optimize, nsga2_optimize_excluding,
};

/// Settings shared by the GA and NSGA-II.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvolveParams {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    /// Per-gene reset probability; `None` means `1 / |dims|`.
    pub mutation_rate: Option<f64>,
    pub elitism: usize,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 100,
            tournament_size: 2,
            crossover_rate: 0.9,
            mutation_rate: None,
            elitism: 1,
        }
    }
}

impl EvolveParams {
    pub(crate) fn mutation_rate_for(&self, n_genes: usize) -> f64 {
        self.mutation_rate
            .unwrap_or_else(|| 1.0 / n_genes.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub sub: SubVector,
    pub objectives: Vec<f64>,
    pub rank: usize,
    pub crowding: f64,
}

impl Individual {
    pub fn new(sub: SubVector, objectives: Vec<f64>) -> Self {
        Self {
            sub,
            objectives,
            rank: 0,
            crowding: 0.0,
        }
    }
}

/// Mutually non-dominated individuals (maximization).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<Individual>,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Rank-0 subset of `pop`; identical code vectors are kept once.
    pub fn from_population(mut pop: Vec<Individual>) -> crate::Result<Self> {
        let fronts = non_dominated_sort(&mut pop)?;
        let mut seen = std::collections::HashSet::new();
        let members = fronts
            .first()
            .map(|f| {
                f.iter()
                    .filter(|&&i| seen.insert(pop[i].sub.codes.clone()))
                    .map(|&i| pop[i].clone())
                    .collect()
            })
            .unwrap_or_default();
        Ok(Self { members })
    }
}
