//! Coupled quadratic chain.
//!
//! Block `i` holds `k` codes decoded to reals in `[-2, 2]`. The fitness is
//!
//! ```text
//! f(h) = -[ sum_ij (x_ij - c_ij)^2 + kappa * sum_i (mu_i - mu_{i+1})^2 ]
//! ```
//!
//! where `mu_i` is the mean of block `i`. Targets share one block mean, so
//! the maximum is 0 at `x = c`. A segment scores its own blocks and couples
//! its first block to the incoming state scalar (the mean of the block
//! before it); the root state carries no scalar and adds no term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_segment_sub, segment_cost, Evaluation, PropagatedState, SegmentEvaluator};
use crate::decomposition::Segment;
use crate::error::{Error, Result};
use crate::space::{HyperparameterSpec, SolutionVector, SpaceLayout, SubVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadraticParams {
    pub n_blocks: usize,
    pub dims_per_block: usize,
    /// Codes per dimension, `0..levels`.
    pub levels: i64,
    pub kappa: f64,
    pub seed: u64,
}

impl Default for QuadraticParams {
    fn default() -> Self {
        Self {
            n_blocks: 15,
            dims_per_block: 2,
            levels: 21,
            kappa: 5.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticBench {
    params: QuadraticParams,
    layout: SpaceLayout,
    target_codes: Vec<i64>,
    targets: Vec<f64>,
    next_state: u64,
}

impl QuadraticBench {
    pub fn new(params: QuadraticParams) -> Result<Self> {
        if params.n_blocks == 0 || params.dims_per_block == 0 || params.levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "bad quadratic parameters {params:?}"
            )));
        }
        let hi = params.levels - 1;
        let block: Vec<HyperparameterSpec> = (0..params.dims_per_block)
            .map(|j| HyperparameterSpec::integer(format!("x{j}"), 0, hi))
            .collect::<Result<_>>()?;
        let layout = SpaceLayout::uniform(params.n_blocks, block)?;

        // every block's target codes sum to the same total
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let k = params.dims_per_block as i64;
        let total = rng.gen_range(k * hi / 4..=k * hi - k * hi / 4);
        let mut target_codes = Vec::with_capacity(layout.total_dims());
        for _ in 0..params.n_blocks {
            loop {
                let mut codes: Vec<i64> = (0..k - 1).map(|_| rng.gen_range(0..=hi)).collect();
                let last = total - codes.iter().sum::<i64>();
                if (0..=hi).contains(&last) {
                    codes.push(last);
                    target_codes.extend(codes);
                    break;
                }
            }
        }
        let targets = target_codes.iter().map(|&c| decode(c, hi)).collect();
        Ok(Self {
            params,
            layout,
            target_codes,
            targets,
            next_state: 0,
        })
    }

    pub fn params(&self) -> &QuadraticParams {
        &self.params
    }

    /// The maximizer, fitness 0.
    pub fn optimum(&self) -> SolutionVector {
        SolutionVector(self.target_codes.clone())
    }

    fn hi(&self) -> i64 {
        self.params.levels - 1
    }

    fn block_terms(&self, codes: &[i64], first_dim: usize) -> (f64, f64) {
        let mut sq = 0.0;
        for (j, &c) in codes.iter().enumerate() {
            sq += (decode(c, self.hi()) - self.targets[first_dim + j]).powi(2);
        }
        // mean taken over codes so equal code sums give identical means
        let code_sum: i64 = codes.iter().sum();
        let mu = -2.0 + 4.0 * code_sum as f64 / (self.hi() * codes.len() as i64) as f64;
        (sq, mu)
    }

    /// Closed-form fitness over blocks `first..=last` with an optional
    /// incoming mean.
    fn chain_fitness(&self, h: &[i64], first: usize, last: usize, incoming: Option<f64>) -> f64 {
        let mut sq_total = 0.0;
        let mut coupling = 0.0;
        let mut prev = incoming;
        for b in first..=last {
            let dims = self.layout.block_dims(b);
            let (sq, mu) = self.block_terms(&h[dims.clone()], dims.start);
            sq_total += sq;
            if let Some(p) = prev {
                coupling += (p - mu).powi(2);
            }
            prev = Some(mu);
        }
        -(sq_total + self.params.kappa * coupling)
    }

    fn incoming(&self, state: &PropagatedState) -> Result<Option<f64>> {
        if state.is_root() {
            return Ok(None);
        }
        match state.payload.as_deref() {
            Some([mu]) => Ok(Some(*mu)),
            _ => Err(Error::StaleState(state.id.clone())),
        }
    }

    /// Place a sub-vector's codes into a full-length buffer.
    fn spread(&self, sub: &SubVector) -> Vec<i64> {
        let mut h = vec![0; self.layout.total_dims()];
        for (&d, &c) in sub.dims.iter().zip(&sub.codes) {
            h[d] = c;
        }
        h
    }
}

fn decode(code: i64, hi: i64) -> f64 {
    -2.0 + 4.0 * code as f64 / hi as f64
}

impl SegmentEvaluator for QuadraticBench {
    fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    fn root_state(&self) -> PropagatedState {
        PropagatedState::root(None)
    }

    fn evaluate_segment(
        &mut self,
        segment: &Segment,
        sub: &SubVector,
        state: &PropagatedState,
    ) -> Result<Evaluation> {
        check_segment_sub(&self.layout, segment, sub)?;
        let incoming = self.incoming(state)?;
        let h = self.spread(sub);
        Ok(Evaluation {
            fitness: self.chain_fitness(&h, segment.first_block(), segment.last_block(), incoming),
            cost: segment_cost(&self.layout, segment),
        })
    }

    fn propagate(
        &mut self,
        segment: &Segment,
        until_block: usize,
        sub: &SubVector,
        state: &PropagatedState,
    ) -> Result<PropagatedState> {
        check_segment_sub(&self.layout, segment, sub)?;
        self.incoming(state)?;
        if !(segment.first_block()..=segment.last_block()).contains(&until_block) {
            return Err(Error::InvalidParameter(format!(
                "block {until_block} outside segment {}",
                segment.id
            )));
        }
        let h = self.spread(sub);
        let dims = self.layout.block_dims(until_block);
        let (_, mu) = self.block_terms(&h[dims.clone()], dims.start);
        self.next_state += 1;
        Ok(PropagatedState {
            id: format!("q{}", self.next_state),
            payload: Some(vec![mu]),
        })
    }

    fn full_evaluate(&mut self, h: &SolutionVector) -> Result<Evaluation> {
        h.validate(&self.layout)?;
        Ok(Evaluation {
            fitness: self.chain_fitness(h.codes(), 0, self.layout.n_blocks() - 1, None),
            cost: 1.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::sod_decompose;
    use crate::space::random_sample;

    /// Direct re-statement of the benchmark formula.
    fn oracle(bench: &QuadraticBench, h: &[i64]) -> f64 {
        let p = bench.params();
        let hi = (p.levels - 1) as f64;
        let x: Vec<f64> = h.iter().map(|&c| -2.0 + 4.0 * c as f64 / hi).collect();
        let c: Vec<f64> = bench
            .optimum()
            .0
            .iter()
            .map(|&c| -2.0 + 4.0 * c as f64 / hi)
            .collect();
        let k = p.dims_per_block;
        let mu: Vec<f64> = x
            .chunks(k)
            .map(|b| b.iter().sum::<f64>() / k as f64)
            .collect();
        let sq: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
        let coupling: f64 = mu.windows(2).map(|w| (w[0] - w[1]).powi(2)).sum();
        -(sq + p.kappa * coupling)
    }

    #[test]
    fn optimum_scores_zero() {
        let mut bench = QuadraticBench::new(QuadraticParams::default()).unwrap();
        let opt = bench.optimum();
        assert_eq!(bench.full_evaluate(&opt).unwrap().fitness, 0.0);
        let c = &bench.optimum().0;
        let sums: Vec<i64> = c.chunks(2).map(|b| b.iter().sum()).collect();
        assert!(sums.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn random_solutions_match_formula() {
        let mut bench = QuadraticBench::new(QuadraticParams {
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let h = bench.layout().random_solution(&mut rng);
            let got = bench.full_evaluate(&h).unwrap().fitness;
            let want = oracle(&bench, &h.0);
            assert!(got < 0.0);
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn segments_compose_into_the_full_fitness() {
        // exclusive pieces with the true incoming mean sum to the full score
        let mut bench = QuadraticBench::new(QuadraticParams::default()).unwrap();
        let layout = bench.layout().clone();
        let plan = crate::decomposition::exclusive_decompose(&layout, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = layout.random_solution(&mut rng);
        let mut state = bench.root_state();
        let mut total = 0.0;
        for seg in &plan.segments {
            let sub = h.project(&seg.dims);
            total += bench.evaluate_segment(seg, &sub, &state).unwrap().fitness;
            state = bench
                .propagate(seg, seg.last_block(), &sub, &state)
                .unwrap();
        }
        let full = bench.full_evaluate(&h).unwrap().fitness;
        assert!((total - full).abs() < 1e-9);
    }

    #[test]
    fn segment_cost_is_block_share() {
        let mut bench = QuadraticBench::new(QuadraticParams::default()).unwrap();
        let layout = bench.layout().clone();
        let plan = sod_decompose(&layout, 10).unwrap();
        let seg = plan.segment(0);
        assert_eq!(seg.n_blocks(), 5);
        let sub = random_sample(&seg.dims, &layout, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let e = bench
            .evaluate_segment(seg, &sub, &bench.root_state())
            .unwrap();
        assert!((e.cost - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stale_state_is_rejected() {
        let mut bench = QuadraticBench::new(QuadraticParams::default()).unwrap();
        let layout = bench.layout().clone();
        let plan = sod_decompose(&layout, 10).unwrap();
        let seg = plan.segment(1);
        let sub = bench.optimum().project(&seg.dims);
        let bogus = PropagatedState {
            id: "q99".into(),
            payload: None,
        };
        assert!(matches!(
            bench.evaluate_segment(seg, &sub, &bogus),
            Err(Error::StaleState(_))
        ));
        let short = SubVector::new(vec![0], vec![0]).unwrap();
        assert!(bench
            .evaluate_segment(seg, &short, &bench.root_state())
            .is_err());
    }
}
