//! Newline-delimited JSON protocol between the engine and an out-of-process
//! evaluator, plus [`serve`], which exposes any in-process evaluator over it.
//!
//! Besides the base fields, evaluate and propagate requests carry
//! `"blocks":[first,last]` so the child knows which blocks the segment spans,
//! and propagate carries `"until"`, the last block to apply. Segment `0`
//! denotes the whole chain and is answered with a full evaluation.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{whole_chain, PropagatedState, SegmentEvaluator, ROOT_STATE};
use crate::decomposition::Segment;
use crate::error::{Error, Result};
use crate::space::{SolutionVector, SubVector};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Request {
    Hello {
        version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Evaluate {
        segment: usize,
        codes: Vec<i64>,
        state: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blocks: Option<[usize; 2]>,
    },
    Propagate {
        segment: usize,
        codes: Vec<i64>,
        state: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        blocks: Option<[usize; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        until: Option<usize>,
    },
    Shutdown,
}

/// Union of every reply shape; unused fields are omitted on the wire.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims_per_block: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
}

impl Response {
    pub fn ok() -> Self {
        Self {
            ok: true,
            ..Self::default()
        }
    }

    pub fn failure(msg: impl Into<String>) -> Self {
        Self {
            ok: false,
            error: Some(msg.into()),
            ..Self::default()
        }
    }
}

struct Server<E> {
    evaluator: E,
    states: HashMap<String, PropagatedState>,
}

impl<E: SegmentEvaluator> Server<E> {
    fn segment(&self, id: usize, blocks: Option<[usize; 2]>) -> Result<Segment> {
        let layout = self.evaluator.layout();
        if id == 0 {
            return Ok(whole_chain(layout));
        }
        let [first, last] =
            blocks.ok_or_else(|| Error::InvalidParameter("request lacks \"blocks\"".into()))?;
        if first > last || last >= layout.n_blocks() {
            return Err(Error::InvalidParameter(format!(
                "bad block range [{first},{last}]"
            )));
        }
        Ok(Segment {
            id,
            block_range: (first, last),
            dims: layout.block_range_dims(first, last).collect(),
        })
    }

    fn state(&self, id: &str) -> Result<PropagatedState> {
        if id == ROOT_STATE {
            return Ok(self.evaluator.root_state());
        }
        self.states
            .get(id)
            .cloned()
            .ok_or_else(|| Error::StaleState(id.to_string()))
    }

    fn handle(&mut self, req: Request) -> Result<Response> {
        match req {
            Request::Hello { version, .. } => {
                if version != PROTOCOL_VERSION {
                    return Err(Error::InvalidParameter(format!(
                        "unsupported version {version}"
                    )));
                }
                let layout = self.evaluator.layout();
                Ok(Response {
                    n_blocks: Some(layout.n_blocks()),
                    dims_per_block: Some(layout.dims_per_block()),
                    ..Response::ok()
                })
            }
            Request::Evaluate {
                segment,
                codes,
                state,
                blocks,
            } => {
                let eval = if segment == 0 {
                    self.evaluator.full_evaluate(&SolutionVector(codes))?
                } else {
                    let seg = self.segment(segment, blocks)?;
                    let st = self.state(&state)?;
                    let sub = SubVector::new(seg.dims.clone(), codes)?;
                    self.evaluator.evaluate_segment(&seg, &sub, &st)?
                };
                Ok(Response {
                    fitness: Some(eval.fitness),
                    cost: Some(eval.cost),
                    ..Response::ok()
                })
            }
            Request::Propagate {
                segment,
                codes,
                state,
                blocks,
                until,
            } => {
                let seg = self.segment(segment, blocks)?;
                let st = self.state(&state)?;
                let sub = SubVector::new(seg.dims.clone(), codes)?;
                let until = until.unwrap_or(seg.last_block());
                let out = self.evaluator.propagate(&seg, until, &sub, &st)?;
                let id = out.id.clone();
                self.states.insert(id.clone(), out);
                Ok(Response {
                    state: Some(id),
                    ..Response::ok()
                })
            }
            Request::Shutdown => Ok(Response::ok()),
        }
    }
}

/// Answer requests from `input` until shutdown or end of input. Malformed
/// or failing requests get an `ok:false` reply and the loop continues.
pub fn serve<E, R, W>(evaluator: E, input: R, mut output: W) -> Result<()>
where
    E: SegmentEvaluator,
    R: BufRead,
    W: Write,
{
    let mut server = Server {
        evaluator,
        states: HashMap::new(),
    };
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (reply, stop) = match serde_json::from_str::<Request>(&line) {
            Ok(req) => {
                let stop = req == Request::Shutdown;
                let reply = server
                    .handle(req)
                    .unwrap_or_else(|e| Response::failure(e.to_string()));
                (reply, stop)
            }
            Err(e) => (Response::failure(format!("malformed request: {e}")), false),
        };
        serde_json::to_writer(&mut output, &reply)?;
        output.write_all(b"\n")?;
        output.flush()?;
        if stop {
            break;
        }
    }
    Ok(())
}
