//! Feature-pipeline chain.
//!
//! Each block applies `y <- a * act(y + b)` elementwise to a fixed batch of
//! vectors, with three codes per block: scale `a` in `0.50..=2.00` (step
//! 0.05), bias `b` in `-1.0..=1.0` (step 0.1) and the activation. A hidden
//! configuration defines the targets. A segment is scored by how closely
//! its output on the incoming batch matches the hidden segment applied to
//! the same batch, which is the feature-map hand-off between sub-networks
//! in miniature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_segment_sub, segment_cost, Evaluation, PropagatedState, SegmentEvaluator};
use crate::decomposition::Segment;
use crate::error::{Error, Result};
use crate::space::{HyperparameterSpec, SolutionVector, SpaceLayout, SubVector};

pub const SCALE_CODES: i64 = 31;
pub const BIAS_CODES: i64 = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Clip,
}

impl Activation {
    pub fn from_code(code: i64) -> Self {
        match code {
            0 => Self::Identity,
            1 => Self::Tanh,
            _ => Self::Clip,
        }
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Self::Identity => v,
            Self::Tanh => v.tanh(),
            Self::Clip => v.clamp(-1.0, 1.0),
        }
    }
}

pub fn decode_scale(code: i64) -> f64 {
    (10 + code) as f64 / 20.0
}

pub fn decode_bias(code: i64) -> f64 {
    (code - 10) as f64 / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub n_blocks: usize,
    pub n_samples: usize,
    pub width: usize,
    pub seed: u64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            n_blocks: 10,
            n_samples: 32,
            width: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineBench {
    params: PipelineParams,
    layout: SpaceLayout,
    data: Vec<f64>,
    truth: SolutionVector,
    target: Vec<f64>,
    next_state: u64,
}

pub fn pipeline_block() -> Vec<HyperparameterSpec> {
    vec![
        HyperparameterSpec::integer("scale", 0, SCALE_CODES - 1).expect("valid"),
        HyperparameterSpec::integer("bias", 0, BIAS_CODES - 1).expect("valid"),
        HyperparameterSpec::categorical("activation", ["identity", "tanh", "clip"]).expect("valid"),
    ]
}

impl PipelineBench {
    pub fn new(params: PipelineParams) -> Result<Self> {
        if params.n_blocks == 0 || params.n_samples == 0 || params.width == 0 {
            return Err(Error::InvalidParameter(format!(
                "bad pipeline parameters {params:?}"
            )));
        }
        let layout = SpaceLayout::uniform(params.n_blocks, pipeline_block())?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let data: Vec<f64> = (0..params.n_samples * params.width)
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        let truth = layout.random_solution(&mut rng);
        let target = forward(&layout, truth.codes(), 0, params.n_blocks - 1, &data);
        Ok(Self {
            params,
            layout,
            data,
            truth,
            target,
            next_state: 0,
        })
    }

    pub fn params(&self) -> &PipelineParams {
        &self.params
    }

    /// The hidden configuration, fitness 0.
    pub fn truth(&self) -> &SolutionVector {
        &self.truth
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn batch<'s>(&self, state: &'s PropagatedState) -> Result<&'s [f64]> {
        match state.payload.as_deref() {
            Some(p) if p.len() == self.data.len() => Ok(p),
            _ => Err(Error::StaleState(state.id.clone())),
        }
    }

    fn spread(&self, sub: &SubVector) -> Vec<i64> {
        let mut h = self.truth.0.clone();
        for (&d, &c) in sub.dims.iter().zip(&sub.codes) {
            h[d] = c;
        }
        h
    }
}

/// Apply blocks `first..=last` of `h` to `input`.
pub fn forward(
    layout: &SpaceLayout,
    h: &[i64],
    first: usize,
    last: usize,
    input: &[f64],
) -> Vec<f64> {
    let mut y = input.to_vec();
    for b in first..=last {
        let dims = layout.block_dims(b);
        let codes = &h[dims];
        let (a, bias, act) = (
            decode_scale(codes[0]),
            decode_bias(codes[1]),
            Activation::from_code(codes[2]),
        );
        for v in y.iter_mut() {
            *v = a * act.apply(*v + bias);
        }
    }
    y
}

fn neg_mse(a: &[f64], b: &[f64]) -> f64 {
    -a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

impl SegmentEvaluator for PipelineBench {
    fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    fn root_state(&self) -> PropagatedState {
        PropagatedState::root(Some(self.data.clone()))
    }

    fn evaluate_segment(
        &mut self,
        segment: &Segment,
        sub: &SubVector,
        state: &PropagatedState,
    ) -> Result<Evaluation> {
        check_segment_sub(&self.layout, segment, sub)?;
        let input = self.batch(state)?;
        let h = self.spread(sub);
        let (first, last) = segment.block_range;
        let out = forward(&self.layout, &h, first, last, input);
        let want = forward(&self.layout, self.truth.codes(), first, last, input);
        Ok(Evaluation {
            fitness: neg_mse(&out, &want),
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
        let input = self.batch(state)?;
        if !(segment.first_block()..=segment.last_block()).contains(&until_block) {
            return Err(Error::InvalidParameter(format!(
                "block {until_block} outside segment {}",
                segment.id
            )));
        }
        let h = self.spread(sub);
        let out = forward(&self.layout, &h, segment.first_block(), until_block, input);
        self.next_state += 1;
        Ok(PropagatedState {
            id: format!("p{}", self.next_state),
            payload: Some(out),
        })
    }

    fn full_evaluate(&mut self, h: &SolutionVector) -> Result<Evaluation> {
        h.validate(&self.layout)?;
        let out = forward(
            &self.layout,
            h.codes(),
            0,
            self.layout.n_blocks() - 1,
            &self.data,
        );
        Ok(Evaluation {
            fitness: neg_mse(&out, &self.target),
            cost: 1.0,
        })
    }
}
