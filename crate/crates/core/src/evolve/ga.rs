use std::collections::HashSet;

use rand::Rng;

use super::operators::{
    fresh_random, gene_specs, normalized, random_genome, reset_mutation, to_sub, uniform_crossover,
    Cached,
};
use super::EvolveParams;
use crate::error::Result;
use crate::space::{SpaceLayout, SubVector};
use crate::surrogate::RbfModel;

/// Maximize the surrogate over the codes of `dims` with a generational GA.
pub fn ga_optimize<R: Rng + ?Sized>(
    model: &RbfModel,
    dims: &[usize],
    layout: &SpaceLayout,
    params: &EvolveParams,
    rng: &mut R,
) -> Result<SubVector> {
    ga_optimize_excluding(model, dims, layout, params, &HashSet::new(), rng)
}

/// As [`ga_optimize`], but the returned genome is never in `exclude`
/// unless every genome the search could find is excluded.
///
/// The best non-excluded genome seen in any generation is returned, so the
/// result is never worse on the surrogate than the best admissible member
/// of the initial population.
pub fn ga_optimize_excluding<R: Rng + ?Sized>(
    model: &RbfModel,
    dims: &[usize],
    layout: &SpaceLayout,
    params: &EvolveParams,
    exclude: &HashSet<Vec<i64>>,
    rng: &mut R,
) -> Result<SubVector> {
    let specs = gene_specs(dims, layout, &[model])?;
    if dims.is_empty() {
        return Ok(SubVector::empty());
    }
    let mut fitness =
        Cached::new(|g: &[i64]| vec![model.predict_unchecked(&normalized(g, &specs))]);
    let pop_size = params.population.max(2);
    let pm = params.mutation_rate_for(dims.len());

    let mut pop: Vec<Vec<i64>> = (0..pop_size).map(|_| random_genome(&specs, rng)).collect();
    let mut best: Option<(Vec<i64>, f64)> = None;
    let mut best_any: Option<(Vec<i64>, f64)> = None;

    let mut scores: Vec<f64>;
    for gen in 0..=params.generations {
        scores = pop.iter().map(|g| fitness.get(g)[0]).collect();
        for (g, &s) in pop.iter().zip(&scores) {
            if best_any.as_ref().is_none_or(|(_, b)| s > *b) {
                best_any = Some((g.clone(), s));
            }
            if !exclude.contains(g) && best.as_ref().is_none_or(|(_, b)| s > *b) {
                best = Some((g.clone(), s));
            }
        }
        if gen == params.generations {
            break;
        }

        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let mut next: Vec<Vec<i64>> = order
            .iter()
            .take(params.elitism.min(pop_size))
            .map(|&i| pop[i].clone())
            .collect();

        let tournament = |rng: &mut R| -> usize {
            let mut winner = rng.gen_range(0..pop.len());
            for _ in 1..params.tournament_size.max(1) {
                let other = rng.gen_range(0..pop.len());
                if scores[other] > scores[winner] {
                    winner = other;
                }
            }
            winner
        };
        while next.len() < pop_size {
            let a = tournament(rng);
            let b = tournament(rng);
            let (mut c, mut d) = uniform_crossover(&pop[a], &pop[b], params.crossover_rate, rng);
            reset_mutation(&mut c, &specs, pm, rng);
            reset_mutation(&mut d, &specs, pm, rng);
            next.push(c);
            if next.len() < pop_size {
                next.push(d);
            }
        }
        pop = next;
    }

    let genome = match best {
        Some((g, _)) => g,
        None => fresh_random(&specs, exclude, rng)
            .unwrap_or_else(|| best_any.expect("population is non-empty").0),
    };
    Ok(to_sub(dims, genome))
}
