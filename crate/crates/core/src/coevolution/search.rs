//! Surrogate-assisted search loops shared by every phase.

use std::collections::HashSet;

use log::trace;
use rand::Rng;

use super::{CoevConfig, PhaseOutcome};
use crate::error::{Error, Result};
use crate::evolve::{
    ga_optimize_excluding, knee_point, nsga2_optimize_excluding, Individual, ParetoFront,
};
use crate::space::{normalize, random_sample, SpaceLayout, SubVector};
use crate::surrogate::{fit_rbf_with, localized_augment, Provenance, RbfModel, TrainingSet};

#[derive(Debug, Clone)]
pub(crate) struct SearchResult<T> {
    /// Best real-evaluated candidate, if any evaluation completed.
    pub best: Option<(SubVector, T)>,
    pub outcome: PhaseOutcome,
    pub evaluations: usize,
}

/// Up to `dims.len()` distinct initial candidates, `start` first.
fn initial_samples<R: Rng + ?Sized>(
    layout: &SpaceLayout,
    dims: &[usize],
    start: Option<&SubVector>,
    rng: &mut R,
) -> Result<Vec<SubVector>> {
    let target = (dims.len() as u64).min(layout.cardinality(dims)) as usize;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(target);
    if let Some(s) = start {
        seen.insert(s.codes.clone());
        out.push(s.clone());
    }
    let mut tries = 0;
    while out.len() < target && tries < 1000 * target.max(1) {
        tries += 1;
        let s = random_sample(dims, layout, rng)?;
        if seen.insert(s.codes.clone()) {
            out.push(s);
        }
    }
    Ok(out)
}

fn fit(ts: &TrainingSet, cfg: &CoevConfig) -> Result<Option<RbfModel>> {
    match fit_rbf_with(ts, &cfg.rbf) {
        Ok(m) => Ok(Some(m)),
        Err(Error::InsufficientData { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// A random candidate not yet evaluated, if one can be found.
fn unseen_random<R: Rng + ?Sized>(
    layout: &SpaceLayout,
    dims: &[usize],
    seen: &HashSet<Vec<i64>>,
    rng: &mut R,
) -> Result<Option<SubVector>> {
    for _ in 0..1000 {
        let s = random_sample(dims, layout, rng)?;
        if !seen.contains(&s.codes) {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// Single-objective surrogate search over the codes of `dims`.
///
/// `evaluate` returns `None` once the budget is spent. The initial samples
/// are augmented with jittered copies; each loop step fits an RBF, runs
/// the GA on it and evaluates the proposal for real.
pub(crate) fn single_objective<R, F>(
    layout: &SpaceLayout,
    dims: &[usize],
    start: Option<&SubVector>,
    cfg: &CoevConfig,
    rng: &mut R,
    mut evaluate: F,
) -> Result<SearchResult<f64>>
where
    R: Rng + ?Sized,
    F: FnMut(&SubVector) -> Result<Option<f64>>,
{
    let mut result = SearchResult {
        best: None,
        outcome: PhaseOutcome::Completed,
        evaluations: 0,
    };
    let mut seen = HashSet::new();
    let mut real = TrainingSet::new();

    let consider = |sub: SubVector, f: f64, result: &mut SearchResult<f64>| {
        result.evaluations += 1;
        if result.best.as_ref().is_none_or(|(_, b)| f > *b) {
            result.best = Some((sub, f));
        }
    };

    let start = if cfg.seed_incumbent { start } else { None };
    for sub in initial_samples(layout, dims, start, rng)? {
        let Some(f) = evaluate(&sub)? else {
            result.outcome = PhaseOutcome::BudgetExhausted;
            return Ok(result);
        };
        seen.insert(sub.codes.clone());
        real.push_real(normalize(&sub, layout)?, f)?;
        consider(sub, f, &mut result);
    }

    let mut ts = localized_augment(&real, cfg.ldg_copies, cfg.ldg_delta, rng)?;
    for step in 0..cfg.inner_evals {
        let proposal = match fit(&ts, cfg)? {
            Some(model) => {
                let s = ga_optimize_excluding(&model, dims, layout, &cfg.evolve, &seen, rng)?;
                (!seen.contains(&s.codes)).then_some(s)
            }
            None => unseen_random(layout, dims, &seen, rng)?,
        };
        let Some(sub) = proposal else {
            trace!("search space exhausted after {step} surrogate steps");
            break;
        };
        let Some(f) = evaluate(&sub)? else {
            result.outcome = PhaseOutcome::BudgetExhausted;
            return Ok(result);
        };
        seen.insert(sub.codes.clone());
        ts.push_real(normalize(&sub, layout)?, f)?;
        consider(sub, f, &mut result);
    }
    Ok(result)
}

/// Bi-objective surrogate search: NSGA-II on two RBFs, real evaluation of
/// the knee, and finally the knee of the front of all real evaluations.
pub(crate) fn bi_objective<R, F>(
    layout: &SpaceLayout,
    dims: &[usize],
    start: Option<&SubVector>,
    cfg: &CoevConfig,
    rng: &mut R,
    mut evaluate: F,
) -> Result<SearchResult<[f64; 2]>>
where
    R: Rng + ?Sized,
    F: FnMut(&SubVector) -> Result<Option<[f64; 2]>>,
{
    let mut seen = HashSet::new();
    let mut evaluated: Vec<(SubVector, [f64; 2])> = Vec::new();
    let mut real = [TrainingSet::new(), TrainingSet::new()];
    let mut outcome = PhaseOutcome::Completed;

    let start = if cfg.seed_incumbent { start } else { None };
    'search: {
        for sub in initial_samples(layout, dims, start, rng)? {
            let Some(f) = evaluate(&sub)? else {
                outcome = PhaseOutcome::BudgetExhausted;
                break 'search;
            };
            seen.insert(sub.codes.clone());
            let x = normalize(&sub, layout)?;
            real[0].push_real(x.clone(), f[0])?;
            real[1].push_real(x, f[1])?;
            evaluated.push((sub, f));
        }

        // one set of jittered points, labelled with each parent's two scores
        let mut ts = real.clone();
        if cfg.ldg_copies > 0 {
            let aug = localized_augment(&real[0], cfg.ldg_copies, cfg.ldg_delta, rng)?;
            let n = real[0].len();
            for (k, p) in aug.points[n..].iter().enumerate() {
                let parent = k / cfg.ldg_copies;
                ts[0].push(p.clone(), real[0].fitnesses[parent], Provenance::Synthetic)?;
                ts[1].push(p.clone(), real[1].fitnesses[parent], Provenance::Synthetic)?;
            }
        }

        for step in 0..cfg.inner_evals {
            let proposal = match (fit(&ts[0], cfg)?, fit(&ts[1], cfg)?) {
                (Some(a), Some(b)) => {
                    let front =
                        nsga2_optimize_excluding(&a, &b, dims, layout, &cfg.evolve, &seen, rng)?;
                    let knee = knee_point(&front)?.sub;
                    (!seen.contains(&knee.codes)).then_some(knee)
                }
                _ => unseen_random(layout, dims, &seen, rng)?,
            };
            let Some(sub) = proposal else {
                trace!("overlap space exhausted after {step} surrogate steps");
                break;
            };
            let Some(f) = evaluate(&sub)? else {
                outcome = PhaseOutcome::BudgetExhausted;
                break 'search;
            };
            seen.insert(sub.codes.clone());
            let x = normalize(&sub, layout)?;
            ts[0].push_real(x.clone(), f[0])?;
            ts[1].push_real(x, f[1])?;
            evaluated.push((sub, f));
        }
    }

    let evaluations = evaluated.len();
    let best = if evaluated.is_empty() {
        None
    } else {
        let pop = evaluated
            .iter()
            .map(|(s, f)| Individual::new(s.clone(), f.to_vec()))
            .collect();
        let knee = knee_point(&ParetoFront::from_population(pop)?)?;
        Some((knee.sub, [knee.objectives[0], knee.objectives[1]]))
    };
    Ok(SearchResult {
        best,
        outcome,
        evaluations,
    })
}
