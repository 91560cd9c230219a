use std::collections::{HashMap, HashSet};

use rand::Rng;

use crate::error::{Error, Result};
use crate::space::{HyperparameterSpec, SpaceLayout, SubVector};
use crate::surrogate::RbfModel;

/// Gene specs for `dims`, checked against the model dimension.
pub(crate) fn gene_specs<'a>(
    dims: &[usize],
    layout: &'a SpaceLayout,
    models: &[&RbfModel],
) -> Result<Vec<&'a HyperparameterSpec>> {
    for model in models {
        if model.dim() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: dims.len(),
            });
        }
    }
    dims.iter()
        .map(|&d| {
            layout
                .spec(d)
                .ok_or_else(|| Error::InvalidSubVector(format!("dimension {d} out of range")))
        })
        .collect()
}

pub(crate) fn random_genome<R: Rng + ?Sized>(
    specs: &[&HyperparameterSpec],
    rng: &mut R,
) -> Vec<i64> {
    specs.iter().map(|s| s.sample(rng)).collect()
}

/// Uniform crossover producing two complementary children.
pub(crate) fn uniform_crossover<R: Rng + ?Sized>(
    a: &[i64],
    b: &[i64],
    rate: f64,
    rng: &mut R,
) -> (Vec<i64>, Vec<i64>) {
    if !rng.gen_bool(rate.clamp(0.0, 1.0)) {
        return (a.to_vec(), b.to_vec());
    }
    let mut c = a.to_vec();
    let mut d = b.to_vec();
    for i in 0..a.len() {
        if rng.gen_bool(0.5) {
            std::mem::swap(&mut c[i], &mut d[i]);
        }
    }
    (c, d)
}

/// Per-gene reset to a uniform code, followed by repair.
pub(crate) fn reset_mutation<R: Rng + ?Sized>(
    genome: &mut [i64],
    specs: &[&HyperparameterSpec],
    rate: f64,
    rng: &mut R,
) {
    for (g, spec) in genome.iter_mut().zip(specs) {
        if rng.gen_bool(rate.clamp(0.0, 1.0)) {
            *g = spec.sample(rng);
        }
        *g = (*g).clamp(spec.lo, spec.hi);
    }
}

pub(crate) fn normalized(genome: &[i64], specs: &[&HyperparameterSpec]) -> Vec<f64> {
    genome
        .iter()
        .zip(specs)
        .map(|(&g, s)| s.normalize(g))
        .collect()
}

/// Memoized objective over genomes.
pub(crate) struct Cached<F> {
    f: F,
    cache: HashMap<Vec<i64>, Vec<f64>>,
}

impl<F: Fn(&[i64]) -> Vec<f64>> Cached<F> {
    pub(crate) fn new(f: F) -> Self {
        Self {
            f,
            cache: HashMap::new(),
        }
    }

    pub(crate) fn get(&mut self, genome: &[i64]) -> Vec<f64> {
        if let Some(v) = self.cache.get(genome) {
            return v.clone();
        }
        let v = (self.f)(genome);
        self.cache.insert(genome.to_vec(), v.clone());
        v
    }
}

/// A genome outside `exclude`, found by uniform sampling.
pub(crate) fn fresh_random<R: Rng + ?Sized>(
    specs: &[&HyperparameterSpec],
    exclude: &HashSet<Vec<i64>>,
    rng: &mut R,
) -> Option<Vec<i64>> {
    (0..1000)
        .map(|_| random_genome(specs, rng))
        .find(|g| !exclude.contains(g))
}

pub(crate) fn to_sub(dims: &[usize], genome: Vec<i64>) -> SubVector {
    SubVector {
        dims: dims.to_vec(),
        codes: genome,
    }
}
