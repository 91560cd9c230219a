use super::*;
use crate::decomposition::{sod_decompose, Segment};
use crate::problems::{
    segment_cost, PipelineBench, PipelineParams, QuadraticBench, QuadraticParams,
};
use crate::space::{HyperparameterSpec, SpaceLayout};

fn quadratic() -> QuadraticBench {
    QuadraticBench::new(QuadraticParams::default()).unwrap()
}

fn fresh_state<E: SegmentEvaluator>(
    ev: &E,
    flags: VariantFlags,
    epsilon: usize,
    cap: f64,
    seed: u64,
) -> CoevState {
    let plan = if flags.micro_coop {
        sod_decompose(ev.layout(), epsilon).unwrap()
    } else {
        exclusive_decompose(ev.layout(), epsilon).unwrap()
    };
    let h0 = ev
        .layout()
        .random_solution(&mut ChaCha8Rng::seed_from_u64(seed));
    CoevState::new(plan, flags, h0, ev.root_state(), cap).unwrap()
}

/// Records which state every segment evaluation received.
struct Spy<E> {
    inner: E,
    seen: Vec<(usize, String)>,
}

impl<E: SegmentEvaluator> SegmentEvaluator for Spy<E> {
    fn layout(&self) -> &SpaceLayout {
        self.inner.layout()
    }
    fn root_state(&self) -> PropagatedState {
        self.inner.root_state()
    }
    fn evaluate_segment(
        &mut self,
        s: &Segment,
        sub: &SubVector,
        st: &PropagatedState,
    ) -> Result<Evaluation> {
        self.seen.push((s.id, st.id.clone()));
        self.inner.evaluate_segment(s, sub, st)
    }
    fn propagate(
        &mut self,
        s: &Segment,
        until: usize,
        sub: &SubVector,
        st: &PropagatedState,
    ) -> Result<PropagatedState> {
        self.inner.propagate(s, until, sub, st)
    }
    fn full_evaluate(&mut self, h: &SolutionVector) -> Result<Evaluation> {
        self.inner.full_evaluate(h)
    }
}

/// Every segment scores the same function of dims 2 and 3.
struct Twin {
    layout: SpaceLayout,
    target: [i64; 2],
}

impl Twin {
    fn new() -> Self {
        let block = vec![
            HyperparameterSpec::integer("u", 0, 20).unwrap(),
            HyperparameterSpec::integer("v", 0, 20).unwrap(),
        ];
        Self {
            layout: SpaceLayout::uniform(3, block).unwrap(),
            target: [13, 4],
        }
    }

    fn score(&self, h: &SolutionVector) -> f64 {
        -((h.0[2] - self.target[0]).pow(2) + (h.0[3] - self.target[1]).pow(2)) as f64
    }
}

impl SegmentEvaluator for Twin {
    fn layout(&self) -> &SpaceLayout {
        &self.layout
    }
    fn root_state(&self) -> PropagatedState {
        PropagatedState::root(None)
    }
    fn evaluate_segment(
        &mut self,
        s: &Segment,
        sub: &SubVector,
        _: &PropagatedState,
    ) -> Result<Evaluation> {
        let mut h = SolutionVector(vec![0; 6]);
        h.splice(sub);
        Ok(Evaluation {
            fitness: self.score(&h),
            cost: segment_cost(&self.layout, s),
        })
    }
    fn propagate(
        &mut self,
        _: &Segment,
        _: usize,
        _: &SubVector,
        st: &PropagatedState,
    ) -> Result<PropagatedState> {
        Ok(st.clone())
    }
    fn full_evaluate(&mut self, h: &SolutionVector) -> Result<Evaluation> {
        Ok(Evaluation {
            fitness: self.score(h),
            cost: 1.0,
        })
    }
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<Method>(&json).unwrap(), m);
    }
    assert!("shcho-plus".parse::<Method>().is_err());
}

#[test]
fn peculiar_phase_counts_and_commits() {
    let mut ev = quadratic();
    let cfg = CoevConfig::default();
    let mut st = fresh_state(&ev, VariantFlags::SHCHO, 10, 1e9, 0);
    let pec = st.plan.peculiar_dims(0);
    assert_eq!(pec.len(), 8);
    let before = st.h_star.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let out = optimize_peculiar(&mut ev, &cfg, &mut st, 0, &pec, &mut rng).unwrap();
    assert_eq!(out, PhaseOutcome::Completed);
    let recs = st.ledger.records();
    assert_eq!(recs.len(), pec.len() + cfg.inner_evals);
    assert!(recs
        .iter()
        .all(|r| r.segment == Some(1) && (r.cost - 1.0 / 3.0).abs() < 1e-15));

    // the commit is the best real evaluation and no worse than any initial sample
    let best = recs
        .iter()
        .map(|r| r.fitness)
        .fold(f64::NEG_INFINITY, f64::max);
    let best_initial = recs[..pec.len()]
        .iter()
        .map(|r| r.fitness)
        .fold(f64::NEG_INFINITY, f64::max);
    let seg = st.plan.segment(0).clone();
    let committed = ev
        .evaluate_segment(&seg, &st.incumbents[0], &ev.root_state())
        .unwrap()
        .fitness;
    assert_eq!(committed, best);
    assert!(committed >= best_initial);
    // only the peculiar dims moved
    for d in 0..before.len() {
        if !pec.contains(&d) {
            assert_eq!(st.h_star.0[d], before.0[d]);
        }
    }
    assert!(st.is_consistent());
}

#[test]
fn overlap_phase_charges_two_per_candidate() {
    let mut ev = quadratic();
    let cfg = CoevConfig::default();
    let mut st = fresh_state(&ev, VariantFlags::SHCHO, 10, 1e9, 2);
    let com = st.plan.overlaps[0].com.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    optimize_overlap(&mut ev, &cfg, &mut st, 0, &mut rng).unwrap();
    let recs = st.ledger.records();
    assert_eq!(recs.len(), 2 * (com.len() + cfg.inner_evals));
    for pair in recs.chunks(2) {
        assert_eq!(pair[0].segment, Some(1));
        assert_eq!(pair[1].segment, Some(2));
    }
    assert!(st.is_consistent());
    assert_eq!(st.incumbents[0].codes[8..], st.incumbents[1].codes[..2]);
}

#[test]
fn overlap_on_exclusive_plan_is_a_no_op() {
    let mut ev = quadratic();
    let mut st = fresh_state(&ev, VariantFlags::NO_MICRO, 10, 1e9, 0);
    let before = st.h_star.clone();
    let out = optimize_overlap(
        &mut ev,
        &CoevConfig::default(),
        &mut st,
        0,
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    assert_eq!(out, PhaseOutcome::Completed);
    assert_eq!(st.h_star, before);
    assert_eq!(st.ledger.spent(), 0.0);
}

#[test]
fn identical_objectives_reduce_to_single_objective() {
    let cfg = CoevConfig::default();
    let com = vec![2, 3];
    let mut single = Vec::new();
    for seed in 0..5 {
        let mut ev = Twin::new();
        let mut st = fresh_state(&ev, VariantFlags::SHCHO, 4, 1e9, seed);
        assert_eq!(st.plan.overlaps[0].com, com);
        optimize_peculiar(
            &mut ev,
            &cfg,
            &mut st,
            0,
            &com,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        single.push(ev.score(&st.h_star));
    }
    let worst = single.iter().copied().fold(f64::INFINITY, f64::min);
    for seed in 0..5 {
        let mut ev = Twin::new();
        let mut st = fresh_state(&ev, VariantFlags::SHCHO, 4, 1e9, seed);
        optimize_overlap(
            &mut ev,
            &cfg,
            &mut st,
            0,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        let recs = st.ledger.records();
        assert!(recs.chunks(2).all(|p| p[0].fitness == p[1].fitness));
        let got = ev.score(&st.h_star);
        let best_seen = recs
            .iter()
            .map(|r| r.fitness)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(got, best_seen);
        assert!(
            got >= worst,
            "overlap {got} below single-objective spread {single:?}"
        );
    }
}

#[test]
fn single_segment_chain_repeats_the_peculiar_phase() {
    let mut ev = QuadraticBench::new(QuadraticParams {
        n_blocks: 3,
        ..Default::default()
    })
    .unwrap();
    let cfg = CoevConfig {
        outer_iters: 2,
        ..Default::default()
    };
    let run = run_shcho(&mut ev, VariantFlags::SHCHO, &cfg, 1e9, 0).unwrap();
    assert_eq!(run.plan.as_ref().unwrap().m(), 1);
    assert_eq!(run.ledger.len(), 2 * (6 + cfg.inner_evals));
    assert!(run
        .ledger
        .records()
        .iter()
        .all(|r| r.segment == Some(1) && r.cost == 1.0));
    assert_eq!(run.iterations, 2);
}

#[test]
fn budget_is_respected_and_replayable() {
    for method in Method::ALL {
        let mut ev = quadratic();
        let cap = 7.5;
        let run = run_method(
            &mut ev,
            method,
            &CoevConfig {
                epsilon: 10,
                ..Default::default()
            },
            cap,
            4,
        )
        .unwrap();
        let recs = run.ledger.records();
        assert!(run.ledger.verify(), "{method}");
        let max_cost = recs.iter().map(|r| r.cost).fold(0.0, f64::max);
        assert!(run.ledger.spent() >= cap, "{method} stopped early");
        assert!(run.ledger.spent() < cap + max_cost, "{method} overshot");
        // no evaluation was issued once the cap was reached
        assert!(
            recs[..recs.len() - 1]
                .iter()
                .all(|r| r.cumulative_cost < cap),
            "{method}"
        );
        for w in recs.windows(2) {
            assert!(w[1].cumulative_cost >= w[0].cumulative_cost);
        }
        assert!(run.best.validate(ev.layout()).is_ok());
    }
}

#[test]
fn best_so_far_is_monotone_per_stream() {
    let mut ev = quadratic();
    let run = run_shcho(
        &mut ev,
        VariantFlags::SHCHO,
        &CoevConfig {
            epsilon: 10,
            ..Default::default()
        },
        40.0,
        9,
    )
    .unwrap();
    let mut last: std::collections::HashMap<Option<usize>, f64> = Default::default();
    for r in run.ledger.records() {
        if let Some(prev) = last.get(&r.segment) {
            assert!(r.best_so_far >= *prev);
        }
        last.insert(r.segment, r.best_so_far);
    }
}

#[test]
fn runs_are_deterministic() {
    for method in [
        Method::Shcho(VariantFlags::SHCHO),
        Method::Sacc,
        Method::Random,
    ] {
        let cfg = CoevConfig {
            epsilon: 9,
            ..Default::default()
        };
        let a = run_method(
            &mut PipelineBench::new(PipelineParams::default()).unwrap(),
            method,
            &cfg,
            12.0,
            5,
        )
        .unwrap();
        let b = run_method(
            &mut PipelineBench::new(PipelineParams::default()).unwrap(),
            method,
            &cfg,
            12.0,
            5,
        )
        .unwrap();
        assert_eq!(a.ledger, b.ledger);
        assert_eq!(a.best, b.best);
        assert_eq!(a.final_fitness.to_bits(), b.final_fitness.to_bits());
    }
}

#[test]
fn sacc_charges_full_evaluations() {
    let mut ev = quadratic();
    let run = run_sacc_baseline(
        &mut ev,
        &CoevConfig {
            epsilon: 10,
            ..Default::default()
        },
        30.0,
        1,
    )
    .unwrap();
    assert!(run
        .ledger
        .records()
        .iter()
        .all(|r| r.cost == 1.0 && r.segment.is_none()));
    // the context vector only moves on improvement
    assert_eq!(run.final_fitness, run.ledger.best_full().unwrap());
}

#[test]
fn random_search_counts_and_returns_the_max() {
    let mut ev = quadratic();
    let run = run_random_search(&mut ev, 10.0, 1).unwrap();
    assert_eq!(run.ledger.len(), 10);
    let max = run
        .ledger
        .records()
        .iter()
        .map(|r| r.fitness)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(run.final_fitness, max);
}

#[test]
fn macro_flag_controls_segment_inputs() {
    let cfg = CoevConfig {
        epsilon: 9,
        outer_iters: 1,
        inner_evals: 2,
        ..Default::default()
    };
    for flags in [
        VariantFlags::SHCHO,
        VariantFlags::NO_MACRO,
        VariantFlags::NO_MICRO,
        VariantFlags::NO_COOP,
    ] {
        let mut spy = Spy {
            inner: PipelineBench::new(PipelineParams::default()).unwrap(),
            seen: Vec::new(),
        };
        let run = run_shcho(&mut spy, flags, &cfg, 1e9, 0).unwrap();
        let plan = run.plan.unwrap();
        assert_eq!(plan.exclusive, !flags.micro_coop);
        let later: Vec<&String> = spy
            .seen
            .iter()
            .filter(|(id, _)| *id > 1)
            .map(|(_, s)| s)
            .collect();
        assert!(!later.is_empty());
        if flags.macro_coop {
            assert!(later.iter().all(|s| s.as_str() != "root"), "{flags:?}");
        } else {
            assert!(spy.seen.iter().all(|(_, s)| s == "root"), "{flags:?}");
        }
        if !flags.micro_coop {
            assert!(plan.overlaps.iter().all(|o| o.com.is_empty()));
        }
    }
}

#[test]
fn small_pipeline_matches_exhaustive_optimum() {
    // one block of (31, 21, 3) codes: 1953 candidates
    let mut ev = PipelineBench::new(PipelineParams {
        n_blocks: 1,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let layout = ev.layout().clone();
    let seg = crate::problems::whole_chain(&layout);
    let root = ev.root_state();
    let mut oracle = (f64::NEG_INFINITY, vec![]);
    for a in 0..31 {
        for b in 0..21 {
            for c in 0..3 {
                let sub = SubVector::new(vec![0, 1, 2], vec![a, b, c]).unwrap();
                let f = ev.evaluate_segment(&seg, &sub, &root).unwrap().fitness;
                if f > oracle.0 {
                    oracle = (f, vec![a, b, c]);
                }
            }
        }
    }
    let cfg = CoevConfig {
        inner_evals: 37,
        ..Default::default()
    };
    let mut st = fresh_state(&ev, VariantFlags::SHCHO, 30, 1e9, 0);
    optimize_peculiar(
        &mut ev,
        &cfg,
        &mut st,
        0,
        &[0, 1, 2],
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    assert!(st.ledger.len() <= 40);
    assert_eq!(st.h_star.0, oracle.1);
}
