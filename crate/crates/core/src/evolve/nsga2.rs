use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;

use super::operators::{
    fresh_random, gene_specs, normalized, random_genome, reset_mutation, to_sub, uniform_crossover,
    Cached,
};
use super::{EvolveParams, Individual, ParetoFront};
use crate::error::{Error, Result};
use crate::space::SpaceLayout;
use crate::surrogate::RbfModel;

/// `a` dominates `b` under maximization.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

/// Fast non-dominated sorting (maximization). Sets `rank` on every
/// individual and returns the fronts as index lists, best first.
pub fn non_dominated_sort(pop: &mut [Individual]) -> Result<Vec<Vec<usize>>> {
    for ind in pop.iter() {
        if ind.objectives.len() != 2 {
            return Err(Error::ArityMismatch {
                expected: 2,
                got: ind.objectives.len(),
            });
        }
    }
    let n = pop.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = vec![Vec::new()];
    for p in 0..n {
        for q in 0..n {
            if p == q {
                continue;
            }
            if dominates(&pop[p].objectives, &pop[q].objectives) {
                dominated_by[p].push(q);
            } else if dominates(&pop[q].objectives, &pop[p].objectives) {
                counts[p] += 1;
            }
        }
        if counts[p] == 0 {
            pop[p].rank = 0;
            fronts[0].push(p);
        }
    }
    let mut k = 0;
    while !fronts[k].is_empty() {
        let mut next = Vec::new();
        for &p in &fronts[k] {
            for &q in &dominated_by[p] {
                counts[q] -= 1;
                if counts[q] == 0 {
                    pop[q].rank = k + 1;
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        k += 1;
        fronts.push(next);
    }
    fronts.pop();
    Ok(fronts)
}

/// Crowding distance of each member of `front` (indices into `pop`).
pub fn crowding_distance(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    if front.len() <= 2 {
        for &i in front {
            pop[i].crowding = f64::INFINITY;
        }
        return;
    }
    let n_obj = pop[front[0]].objectives.len();
    for k in 0..n_obj {
        let mut order = front.to_vec();
        order.sort_by(|&a, &b| pop[a].objectives[k].total_cmp(&pop[b].objectives[k]));
        let lo = pop[order[0]].objectives[k];
        let hi = pop[order[order.len() - 1]].objectives[k];
        pop[order[0]].crowding = f64::INFINITY;
        pop[order[order.len() - 1]].crowding = f64::INFINITY;
        if hi > lo {
            for w in 1..order.len() - 1 {
                let gap = pop[order[w + 1]].objectives[k] - pop[order[w - 1]].objectives[k];
                pop[order[w]].crowding += gap / (hi - lo);
            }
        }
    }
}

fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.total_cmp(&a.crowding))
}

/// Bi-objective NSGA-II maximizing `(model_a, model_b)` over the codes of
/// `dims`; returns the rank-0 members of the final population.
pub fn nsga2_optimize<R: Rng + ?Sized>(
    model_a: &RbfModel,
    model_b: &RbfModel,
    dims: &[usize],
    layout: &SpaceLayout,
    params: &EvolveParams,
    rng: &mut R,
) -> Result<ParetoFront> {
    nsga2_optimize_excluding(model_a, model_b, dims, layout, params, &HashSet::new(), rng)
}

/// As [`nsga2_optimize`], dropping front members found in `exclude`. When
/// every member is excluded, a single fresh random genome is returned
/// instead (or the unfiltered front if none can be found).
pub fn nsga2_optimize_excluding<R: Rng + ?Sized>(
    model_a: &RbfModel,
    model_b: &RbfModel,
    dims: &[usize],
    layout: &SpaceLayout,
    params: &EvolveParams,
    exclude: &HashSet<Vec<i64>>,
    rng: &mut R,
) -> Result<ParetoFront> {
    let specs = gene_specs(dims, layout, &[model_a, model_b])?;
    let mut objectives = Cached::new(|g: &[i64]| {
        let x = normalized(g, &specs);
        vec![model_a.predict_unchecked(&x), model_b.predict_unchecked(&x)]
    });
    let n = params.population.max(4);
    let pm = params.mutation_rate_for(dims.len());
    let mut make = |g: Vec<i64>| {
        let obj = objectives.get(&g);
        Individual::new(to_sub(dims, g), obj)
    };

    let mut pop: Vec<Individual> = (0..n).map(|_| make(random_genome(&specs, rng))).collect();
    let fronts = non_dominated_sort(&mut pop)?;
    for f in &fronts {
        crowding_distance(&mut pop, f);
    }

    for _ in 0..params.generations {
        let tournament = |pop: &[Individual], rng: &mut R| -> usize {
            let mut winner = rng.gen_range(0..pop.len());
            for _ in 1..params.tournament_size.max(1) {
                let other = rng.gen_range(0..pop.len());
                if crowded_cmp(&pop[other], &pop[winner]) == Ordering::Less {
                    winner = other;
                }
            }
            winner
        };
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let a = tournament(&pop, rng);
            let b = tournament(&pop, rng);
            let (mut c, mut d) = uniform_crossover(
                &pop[a].sub.codes,
                &pop[b].sub.codes,
                params.crossover_rate,
                rng,
            );
            reset_mutation(&mut c, &specs, pm, rng);
            reset_mutation(&mut d, &specs, pm, rng);
            offspring.push(make(c));
            if offspring.len() < n {
                offspring.push(make(d));
            }
        }

        // merge, dropping duplicate genomes so the front keeps its spread
        let mut seen = HashSet::new();
        let mut merged: Vec<Individual> = pop
            .into_iter()
            .chain(offspring)
            .filter(|ind| seen.insert(ind.sub.codes.clone()))
            .collect();
        let fronts = non_dominated_sort(&mut merged)?;
        let mut survivors: Vec<usize> = Vec::with_capacity(n);
        for front in &fronts {
            crowding_distance(&mut merged, front);
            if survivors.len() + front.len() <= n {
                survivors.extend(front);
            } else {
                let mut rest = front.clone();
                rest.sort_by(|&a, &b| merged[b].crowding.total_cmp(&merged[a].crowding));
                survivors.extend(rest.into_iter().take(n - survivors.len()));
                break;
            }
        }
        let mut next: Vec<Individual> = survivors.into_iter().map(|i| merged[i].clone()).collect();
        // small code spaces may not fill the population with distinct genomes
        while next.len() < n {
            let g = random_genome(&specs, rng);
            next.push(make(g));
        }
        let fronts = non_dominated_sort(&mut next)?;
        for f in &fronts {
            crowding_distance(&mut next, f);
        }
        pop = next;
    }

    let front = ParetoFront::from_population(pop)?;
    if exclude.is_empty() {
        return Ok(front);
    }
    let kept: Vec<Individual> = front
        .members
        .iter()
        .filter(|m| !exclude.contains(&m.sub.codes))
        .cloned()
        .collect();
    if !kept.is_empty() {
        return Ok(ParetoFront { members: kept });
    }
    match fresh_random(&specs, exclude, rng) {
        Some(g) => Ok(ParetoFront {
            members: vec![make(g)],
        }),
        None => Ok(front),
    }
}
