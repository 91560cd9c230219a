//! Highly cooperative coevolution over a decomposed chain.
//!
//! [`run_shcho`] alternates, segment by segment, between optimizing a
//! segment's peculiar dimensions, handing its output state to the next
//! segment (macro cooperation) and optimizing the dimensions two adjacent
//! segments share against both of their scores (micro cooperation).
//! [`run_sacc_baseline`] and [`run_random_search`] are the reference
//! methods.

mod search;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposition::{exclusive_decompose, sod_decompose, DecompositionPlan};
use crate::error::{Error, Result};
use crate::evolve::EvolveParams;
use crate::problems::{BudgetLedger, Evaluation, PropagatedState, SegmentEvaluator};
use crate::space::{SolutionVector, SubVector};
use crate::surrogate::RbfConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantFlags {
    #[serde(rename = "macro")]
    pub macro_coop: bool,
    #[serde(rename = "micro")]
    pub micro_coop: bool,
}

impl VariantFlags {
    pub const SHCHO: Self = Self::new(true, true);
    pub const NO_MACRO: Self = Self::new(false, true);
    pub const NO_MICRO: Self = Self::new(true, false);
    pub const NO_COOP: Self = Self::new(false, false);

    pub const fn new(macro_coop: bool, micro_coop: bool) -> Self {
        Self {
            macro_coop,
            micro_coop,
        }
    }
}

/// Every runnable method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Shcho(VariantFlags),
    Sacc,
    Random,
}

impl Method {
    /// Methods in the order comparison tables list them.
    pub const ALL: [Method; 6] = [
        Method::Shcho(VariantFlags::SHCHO),
        Method::Shcho(VariantFlags::NO_MACRO),
        Method::Shcho(VariantFlags::NO_MICRO),
        Method::Shcho(VariantFlags::NO_COOP),
        Method::Sacc,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Shcho(VariantFlags::SHCHO) => "shcho",
            Method::Shcho(VariantFlags::NO_MACRO) => "no-macro",
            Method::Shcho(VariantFlags::NO_MICRO) => "no-micro",
            Method::Shcho(_) => "no-coop",
            Method::Sacc => "sacc",
            Method::Random => "random",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> Self {
        m.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoevConfig {
    /// Dimensions per segment before the segment stops growing.
    pub epsilon: usize,
    pub outer_iters: usize,
    /// Surrogate-guided real evaluations after the initial samples.
    pub inner_evals: usize,
    /// Jittered copies per real sample.
    pub ldg_copies: usize,
    pub ldg_delta: f64,
    /// Use the current incumbent as the first initial sample of each phase.
    pub seed_incumbent: bool,
    pub evolve: EvolveParams,
    pub rbf: RbfConfig,
}

impl Default for CoevConfig {
    fn default() -> Self {
        Self {
            epsilon: 30,
            outer_iters: 5,
            inner_evals: 10,
            ldg_copies: 3,
            ldg_delta: 0.05,
            seed_incumbent: true,
            evolve: EvolveParams::default(),
            rbf: RbfConfig::default(),
        }
    }
}

impl CoevConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon == 0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(self.ldg_delta > 0.0) {
            return Err(Error::Config(format!(
                "ldg_delta must be positive, got {}",
                self.ldg_delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseOutcome {
    Completed,
    BudgetExhausted,
}

/// Mutable state of one coevolution run.
#[derive(Debug, Clone)]
pub struct CoevState {
    pub plan: DecompositionPlan,
    pub flags: VariantFlags,
    pub h_star: SolutionVector,
    /// `incumbents[i]` covers exactly segment `i`'s dims.
    pub incumbents: Vec<SubVector>,
    /// `states[i]` is the state fed to segment `i`; `states[0]` is the root.
    pub states: Vec<PropagatedState>,
    pub ledger: BudgetLedger,
    pub iteration: usize,
}

impl CoevState {
    pub fn new(
        plan: DecompositionPlan,
        flags: VariantFlags,
        h_star: SolutionVector,
        root: PropagatedState,
        budget_cap: f64,
    ) -> Result<Self> {
        let incumbents = plan
            .segments
            .iter()
            .map(|s| h_star.project(&s.dims))
            .collect();
        let states = vec![root; plan.m()];
        Ok(Self {
            plan,
            flags,
            h_star,
            incumbents,
            states,
            ledger: BudgetLedger::new(budget_cap)?,
            iteration: 0,
        })
    }

    /// Write `sub` into `h_star` and every incumbent covering its dims.
    pub fn commit(&mut self, sub: &SubVector) {
        self.h_star.splice(sub);
        for (seg, inc) in self.plan.segments.iter().zip(self.incumbents.iter_mut()) {
            if sub.dims.iter().any(|d| seg.dims.binary_search(d).is_ok()) {
                *inc = self.h_star.project(&seg.dims);
            }
        }
    }

    /// Whether every incumbent agrees with `h_star`.
    pub fn is_consistent(&self) -> bool {
        self.plan
            .segments
            .iter()
            .zip(&self.incumbents)
            .all(|(seg, inc)| *inc == self.h_star.project(&seg.dims))
    }

    /// State segment `i` is evaluated on: the propagated state with macro
    /// cooperation, otherwise the root.
    pub fn input_state(&self, i: usize) -> &PropagatedState {
        if self.flags.macro_coop {
            &self.states[i]
        } else {
            &self.states[0]
        }
    }

    /// Segment `i`'s codes with `sub` substituted.
    fn segment_codes(&self, i: usize, sub: &SubVector) -> SubVector {
        self.h_star
            .with_spliced(sub)
            .project(&self.plan.segment(i).dims)
    }
}

/// Charge one evaluation unless the budget is already spent.
fn charged(
    ledger: &mut BudgetLedger,
    segment: Option<usize>,
    eval: impl FnOnce() -> Result<Evaluation>,
) -> Result<Option<f64>> {
    if ledger.exhausted() {
        return Ok(None);
    }
    let e = eval()?;
    Ok(Some(ledger.record(segment, e).fitness))
}

/// Optimize `dims` (a subset of segment `i`, normally its peculiar dims)
/// with the other dimensions frozen at their incumbents, and commit the
/// best real-evaluated candidate.
pub fn optimize_peculiar<E, R>(
    ev: &mut E,
    cfg: &CoevConfig,
    st: &mut CoevState,
    i: usize,
    dims: &[usize],
    rng: &mut R,
) -> Result<PhaseOutcome>
where
    E: SegmentEvaluator + ?Sized,
    R: rand::Rng + ?Sized,
{
    if dims.is_empty() {
        return Ok(PhaseOutcome::Completed);
    }
    let layout = ev.layout().clone();
    let seg = st.plan.segment(i).clone();
    let start = st.h_star.project(dims);
    let input = st.input_state(i).clone();
    let result = {
        let st = &mut *st;
        search::single_objective(&layout, dims, Some(&start), cfg, rng, |sub| {
            let codes = st.segment_codes(i, sub);
            charged(&mut st.ledger, Some(seg.id), || {
                ev.evaluate_segment(&seg, &codes, &input)
            })
        })?
    };
    if let Some((best, f)) = &result.best {
        debug!(
            "segment {}: {} evaluations, committed fitness {f:.6}",
            seg.id, result.evaluations
        );
        st.commit(best);
    }
    Ok(result.outcome)
}

/// Optimize the dims shared by segments `i` and `i + 1` against both
/// segments' scores and commit the knee of the real-evaluated front.
pub fn optimize_overlap<E, R>(
    ev: &mut E,
    cfg: &CoevConfig,
    st: &mut CoevState,
    i: usize,
    rng: &mut R,
) -> Result<PhaseOutcome>
where
    E: SegmentEvaluator + ?Sized,
    R: rand::Rng + ?Sized,
{
    let Some(overlap) = st.plan.overlaps.get(i) else {
        return Ok(PhaseOutcome::Completed);
    };
    let com = overlap.com.clone();
    if com.is_empty() {
        return Ok(PhaseOutcome::Completed);
    }
    let layout = ev.layout().clone();
    let (left, right) = (st.plan.segment(i).clone(), st.plan.segment(i + 1).clone());
    let (in_left, in_right) = (st.input_state(i).clone(), st.input_state(i + 1).clone());
    let start = st.h_star.project(&com);
    let result = {
        let st = &mut *st;
        search::bi_objective(&layout, &com, Some(&start), cfg, rng, |sub| {
            let a = st.segment_codes(i, sub);
            let Some(fa) = charged(&mut st.ledger, Some(left.id), || {
                ev.evaluate_segment(&left, &a, &in_left)
            })?
            else {
                return Ok(None);
            };
            let b = st.segment_codes(i + 1, sub);
            let Some(fb) = charged(&mut st.ledger, Some(right.id), || {
                ev.evaluate_segment(&right, &b, &in_right)
            })?
            else {
                return Ok(None);
            };
            Ok(Some([fa, fb]))
        })?
    };
    if let Some((best, f)) = &result.best {
        debug!(
            "overlap {}|{}: {} pairs, committed ({:.6}, {:.6})",
            left.id, right.id, result.evaluations, f[0], f[1]
        );
        st.commit(best);
    }
    Ok(result.outcome)
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub method: Method,
    pub best: SolutionVector,
    /// `full_evaluate(best)`, computed after the run and not charged.
    pub final_fitness: f64,
    pub ledger: BudgetLedger,
    pub plan: Option<DecompositionPlan>,
    pub iterations: usize,
}

/// Hand segment `i`'s output, cut after its last unshared block, to `i + 1`.
fn hand_off<E: SegmentEvaluator + ?Sized>(ev: &mut E, st: &mut CoevState, i: usize) -> Result<()> {
    let seg = st.plan.segment(i).clone();
    let until = st.plan.handoff_block(i);
    let next = ev.propagate(&seg, until, &st.incumbents[i], &st.states[i])?;
    st.states[i + 1] = next;
    Ok(())
}

pub fn run_shcho<E: SegmentEvaluator + ?Sized>(
    ev: &mut E,
    flags: VariantFlags,
    cfg: &CoevConfig,
    budget_cap: f64,
    seed: u64,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let layout = ev.layout().clone();
    let plan = if flags.micro_coop {
        sod_decompose(&layout, cfg.epsilon)?
    } else {
        exclusive_decompose(&layout, cfg.epsilon)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h0 = layout.random_solution(&mut rng);
    let mut st = CoevState::new(plan, flags, h0, ev.root_state(), budget_cap)?;
    let m = st.plan.m();
    debug!("{} segments, flags {flags:?}", m);

    'rounds: for round in 0..cfg.outer_iters {
        st.iteration = round + 1;
        for i in 0..m - 1 {
            let pec = st.plan.peculiar_dims(i);
            if optimize_peculiar(ev, cfg, &mut st, i, &pec, &mut rng)?
                == PhaseOutcome::BudgetExhausted
            {
                break 'rounds;
            }
            if flags.macro_coop {
                hand_off(ev, &mut st, i)?;
            }
            if flags.micro_coop
                && optimize_overlap(ev, cfg, &mut st, i, &mut rng)? == PhaseOutcome::BudgetExhausted
            {
                break 'rounds;
            }
        }
        let pec = st.plan.peculiar_dims(m - 1);
        if optimize_peculiar(ev, cfg, &mut st, m - 1, &pec, &mut rng)?
            == PhaseOutcome::BudgetExhausted
        {
            break;
        }
    }
    debug_assert!(st.is_consistent());
    let final_fitness = ev.full_evaluate(&st.h_star)?.fitness;
    Ok(RunOutcome {
        method: Method::Shcho(flags),
        best: st.h_star,
        final_fitness,
        ledger: st.ledger,
        plan: Some(st.plan),
        iterations: st.iteration,
    })
}

/// Surrogate-assisted cooperative coevolution with a context vector: an
/// exclusive decomposition whose candidates are scored by splicing them
/// into the context vector and evaluating the whole chain.
pub fn run_sacc_baseline<E: SegmentEvaluator + ?Sized>(
    ev: &mut E,
    cfg: &CoevConfig,
    budget_cap: f64,
    seed: u64,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let layout = ev.layout().clone();
    let plan = exclusive_decompose(&layout, cfg.epsilon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cv = layout.random_solution(&mut rng);
    let mut ledger = BudgetLedger::new(budget_cap)?;
    let mut iterations = 0;

    'rounds: for round in 0..cfg.outer_iters {
        iterations = round + 1;
        for seg in &plan.segments {
            let start = cv.project(&seg.dims);
            let base = cv.clone();
            let result =
                search::single_objective(&layout, &seg.dims, Some(&start), cfg, &mut rng, |sub| {
                    let h = base.with_spliced(sub);
                    charged(&mut ledger, None, || ev.full_evaluate(&h))
                })?;
            if let Some((best, _)) = &result.best {
                cv.splice(best);
            }
            if result.outcome == PhaseOutcome::BudgetExhausted {
                break 'rounds;
            }
        }
    }
    let final_fitness = ev.full_evaluate(&cv)?.fitness;
    Ok(RunOutcome {
        method: Method::Sacc,
        best: cv,
        final_fitness,
        ledger,
        plan: Some(plan),
        iterations,
    })
}

/// Full evaluations of uniform random solutions until the budget is spent.
pub fn run_random_search<E: SegmentEvaluator + ?Sized>(
    ev: &mut E,
    budget_cap: f64,
    seed: u64,
) -> Result<RunOutcome> {
    let layout = ev.layout().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ledger = BudgetLedger::new(budget_cap)?;
    let mut best: Option<(SolutionVector, f64)> = None;
    while !ledger.exhausted() {
        let h = layout.random_solution(&mut rng);
        let e = ev.full_evaluate(&h)?;
        ledger.record(None, e);
        if best.as_ref().is_none_or(|(_, b)| e.fitness > *b) {
            best = Some((h, e.fitness));
        }
    }
    let (best, _) = best.expect("a positive budget admits one evaluation");
    let final_fitness = ev.full_evaluate(&best)?.fitness;
    Ok(RunOutcome {
        method: Method::Random,
        best,
        final_fitness,
        ledger,
        plan: None,
        iterations: 1,
    })
}

pub fn run_method<E: SegmentEvaluator + ?Sized>(
    ev: &mut E,
    method: Method,
    cfg: &CoevConfig,
    budget_cap: f64,
    seed: u64,
) -> Result<RunOutcome> {
    match method {
        Method::Shcho(flags) => run_shcho(ev, flags, cfg, budget_cap, seed),
        Method::Sacc => run_sacc_baseline(ev, cfg, budget_cap, seed),
        Method::Random => run_random_search(ev, budget_cap, seed),
    }
}

#[cfg(test)]
mod tests;
