//! Chain problems and the segment-evaluator contract.
//!
//! A [`SegmentEvaluator`] scores a segment's codes given the state flowing
//! into the segment, hands a state on to the next segment, and scores
//! complete solutions. How the score is produced (training a network for a
//! few epochs, a closed-form benchmark, a child process) is opaque to the
//! optimizer.

mod external;
mod ledger;
mod pipeline;
mod quadratic;
pub mod wire;

use serde::{Deserialize, Serialize};

use crate::decomposition::Segment;
use crate::error::{Error, Result};
use crate::space::{SolutionVector, SpaceLayout, SubVector};

pub use external::ExternalSession;
pub use ledger::{BudgetLedger, EvalRecord};
pub use pipeline::{forward as pipeline_forward, Activation, PipelineBench, PipelineParams};
pub use quadratic::{QuadraticBench, QuadraticParams};

/// Reserved id of the state holding the original data.
pub const ROOT_STATE: &str = "root";

/// Data flowing into a segment. External evaluators keep the payload on
/// their side and only exchange ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatedState {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Vec<f64>>,
}

impl PropagatedState {
    pub fn root(payload: Option<Vec<f64>>) -> Self {
        Self {
            id: ROOT_STATE.to_string(),
            payload,
        }
    }

    pub fn is_root(&self) -> bool {
        self.id == ROOT_STATE
    }
}

/// Fitness (maximized) and cost in full-evaluation units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    pub cost: f64,
}

pub trait SegmentEvaluator {
    fn layout(&self) -> &SpaceLayout;

    fn root_state(&self) -> PropagatedState;

    /// Score `sub` (covering exactly `segment.dims`) on `state`.
    fn evaluate_segment(
        &mut self,
        segment: &Segment,
        sub: &SubVector,
        state: &PropagatedState,
    ) -> Result<Evaluation>;

    /// Apply blocks `segment.first_block()..=until_block` to `state`.
    fn propagate(
        &mut self,
        segment: &Segment,
        until_block: usize,
        sub: &SubVector,
        state: &PropagatedState,
    ) -> Result<PropagatedState>;

    /// Score a complete solution end to end.
    fn full_evaluate(&mut self, h: &SolutionVector) -> Result<Evaluation>;
}

impl<E: SegmentEvaluator + ?Sized> SegmentEvaluator for Box<E> {
    fn layout(&self) -> &SpaceLayout {
        (**self).layout()
    }

    fn root_state(&self) -> PropagatedState {
        (**self).root_state()
    }

    fn evaluate_segment(
        &mut self,
        segment: &Segment,
        sub: &SubVector,
        state: &PropagatedState,
    ) -> Result<Evaluation> {
        (**self).evaluate_segment(segment, sub, state)
    }

    fn propagate(
        &mut self,
        segment: &Segment,
        until_block: usize,
        sub: &SubVector,
        state: &PropagatedState,
    ) -> Result<PropagatedState> {
        (**self).propagate(segment, until_block, sub, state)
    }

    fn full_evaluate(&mut self, h: &SolutionVector) -> Result<Evaluation> {
        (**self).full_evaluate(h)
    }
}

/// Segment covering the whole chain.
pub fn whole_chain(layout: &SpaceLayout) -> Segment {
    Segment {
        id: 0,
        block_range: (0, layout.n_blocks() - 1),
        dims: layout.all_dims(),
    }
}

/// Check that `sub` covers exactly the segment's dims with valid codes.
pub(crate) fn check_segment_sub(
    layout: &SpaceLayout,
    segment: &Segment,
    sub: &SubVector,
) -> Result<()> {
    if sub.dims != segment.dims {
        return Err(Error::InvalidSubVector(format!(
            "sub-vector does not cover segment {} exactly",
            segment.id
        )));
    }
    if segment.last_block() >= layout.n_blocks() {
        return Err(Error::InvalidParameter(format!(
            "segment {} ends past the chain",
            segment.id
        )));
    }
    sub.validate(layout)
}

/// Cost of evaluating `segment`: its share of the chain's blocks.
pub fn segment_cost(layout: &SpaceLayout, segment: &Segment) -> f64 {
    segment.n_blocks() as f64 / layout.n_blocks() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    BenchQuadratic,
    BenchPipeline,
    External,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bench_quadratic" => Ok(Self::BenchQuadratic),
            "bench_pipeline" => Ok(Self::BenchPipeline),
            "external" => Ok(Self::External),
            other => Err(Error::Config(format!("unknown problem `{other}`"))),
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::BenchQuadratic => "bench_quadratic",
            Self::BenchPipeline => "bench_pipeline",
            Self::External => "external",
        })
    }
}

/// Everything needed to build an evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChainProblemSpec {
    Quadratic(QuadraticParams),
    Pipeline(PipelineParams),
    External {
        command: String,
        layout: SpaceLayout,
        seed: u64,
    },
}

impl ChainProblemSpec {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Self::Quadratic(_) => ProblemKind::BenchQuadratic,
            Self::Pipeline(_) => ProblemKind::BenchPipeline,
            Self::External { .. } => ProblemKind::External,
        }
    }

    pub fn build(&self) -> Result<Box<dyn SegmentEvaluator>> {
        Ok(match self {
            Self::Quadratic(p) => Box::new(QuadraticBench::new(p.clone())?),
            Self::Pipeline(p) => Box::new(PipelineBench::new(p.clone())?),
            Self::External {
                command,
                layout,
                seed,
            } => Box::new(ExternalSession::connect(
                command,
                layout.clone(),
                Some(*seed),
            )?),
        })
    }
}
