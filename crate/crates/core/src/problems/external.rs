use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::wire::{Request, Response, PROTOCOL_VERSION};
use super::{
    check_segment_sub, whole_chain, Evaluation, PropagatedState, SegmentEvaluator, ROOT_STATE,
};
use crate::decomposition::Segment;
use crate::error::{Error, Result};
use crate::space::{SolutionVector, SpaceLayout, SubVector};

/// A child process speaking the wire protocol. One request is in flight at
/// a time; the child is asked to shut down when the session is dropped.
pub struct ExternalSession {
    command: String,
    layout: SpaceLayout,
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    issued: HashSet<String>,
    broken: bool,
}

impl std::fmt::Debug for ExternalSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalSession")
            .field("command", &self.command)
            .field("pid", &self.child.id())
            .field("broken", &self.broken)
            .finish()
    }
}

impl ExternalSession {
    /// Spawn `command` through `sh`, perform the handshake and check that
    /// the child's declared layout matches `layout`.
    pub fn connect(command: &str, layout: SpaceLayout, seed: Option<u64>) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(format!("exec {command}"))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::EvaluatorIo(format!("cannot spawn `{command}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut session = Self {
            command: command.to_string(),
            layout,
            child,
            stdin,
            stdout,
            issued: HashSet::new(),
            broken: false,
        };
        let reply = session.call(&Request::Hello {
            version: PROTOCOL_VERSION,
            seed,
        })?;
        let want_blocks = session.layout.n_blocks();
        let want_dims = session.layout.dims_per_block();
        if reply.n_blocks != Some(want_blocks) || reply.dims_per_block.as_ref() != Some(&want_dims)
        {
            session.broken = true;
            return Err(Error::EvaluatorIo(format!(
                "handshake mismatch: child declared n_blocks={:?} dims_per_block={:?}, expected {} and {:?}",
                reply.n_blocks, reply.dims_per_block, want_blocks, want_dims
            )));
        }
        Ok(session)
    }

    fn fail(&mut self, what: String) -> Error {
        self.broken = true;
        let status = match self.child.try_wait() {
            Ok(Some(s)) => format!(" (child exited: {s})"),
            _ => String::new(),
        };
        Error::EvaluatorIo(format!("`{}`: {what}{status}", self.command))
    }

    fn call(&mut self, req: &Request) -> Result<Response> {
        if self.broken {
            return Err(Error::EvaluatorIo(format!(
                "`{}`: session is closed",
                self.command
            )));
        }
        let mut line = serde_json::to_string(req)?;
        line.push('\n');
        let sent = match self.stdin.as_mut() {
            Some(w) => w.write_all(line.as_bytes()).and_then(|_| w.flush()),
            None => Err(std::io::ErrorKind::BrokenPipe.into()),
        };
        if let Err(e) = sent {
            return Err(self.fail(format!("write failed: {e}")));
        }
        let mut reply = String::new();
        match self.stdout.read_line(&mut reply) {
            Ok(0) => return Err(self.fail("child closed its output".into())),
            Err(e) => return Err(self.fail(format!("read failed: {e}"))),
            Ok(_) => {}
        }
        let resp: Response = match serde_json::from_str(reply.trim_end()) {
            Ok(r) => r,
            Err(e) => return Err(self.fail(format!("malformed reply {:?}: {e}", reply.trim_end()))),
        };
        if !resp.ok {
            let msg = resp.error.unwrap_or_else(|| "unspecified error".into());
            return Err(Error::EvaluatorIo(format!(
                "`{}` reported: {msg}",
                self.command
            )));
        }
        Ok(resp)
    }

    fn check_state(&self, state: &PropagatedState) -> Result<()> {
        if state.id == ROOT_STATE || self.issued.contains(&state.id) {
            Ok(())
        } else {
            Err(Error::StaleState(state.id.clone()))
        }
    }

    fn evaluation(&mut self, resp: Response) -> Result<Evaluation> {
        match (resp.fitness, resp.cost) {
            (Some(fitness), Some(cost))
                if fitness.is_finite() && cost.is_finite() && cost >= 0.0 =>
            {
                Ok(Evaluation { fitness, cost })
            }
            _ => Err(self.fail(format!(
                "evaluate reply lacks finite fitness/cost: {:?} {:?}",
                resp.fitness, resp.cost
            ))),
        }
    }

    pub fn shutdown(mut self) -> Result<()> {
        let r = self.call(&Request::Shutdown).map(|_| ());
        self.broken = true;
        r
    }
}

impl SegmentEvaluator for ExternalSession {
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
        self.check_state(state)?;
        let resp = self.call(&Request::Evaluate {
            segment: segment.id,
            codes: sub.codes.clone(),
            state: state.id.clone(),
            blocks: Some([segment.first_block(), segment.last_block()]),
        })?;
        self.evaluation(resp)
    }

    fn propagate(
        &mut self,
        segment: &Segment,
        until_block: usize,
        sub: &SubVector,
        state: &PropagatedState,
    ) -> Result<PropagatedState> {
        check_segment_sub(&self.layout, segment, sub)?;
        self.check_state(state)?;
        let resp = self.call(&Request::Propagate {
            segment: segment.id,
            codes: sub.codes.clone(),
            state: state.id.clone(),
            blocks: Some([segment.first_block(), segment.last_block()]),
            until: Some(until_block),
        })?;
        match resp.state {
            Some(id) if id != ROOT_STATE => {
                self.issued.insert(id.clone());
                Ok(PropagatedState { id, payload: None })
            }
            other => Err(self.fail(format!("propagate reply has bad state id {other:?}"))),
        }
    }

    fn full_evaluate(&mut self, h: &SolutionVector) -> Result<Evaluation> {
        h.validate(&self.layout)?;
        let seg = whole_chain(&self.layout);
        let resp = self.call(&Request::Evaluate {
            segment: 0,
            codes: h.0.clone(),
            state: ROOT_STATE.to_string(),
            blocks: Some([seg.first_block(), seg.last_block()]),
        })?;
        self.evaluation(resp)
    }
}

impl Drop for ExternalSession {
    fn drop(&mut self) {
        if !self.broken {
            if let Some(w) = self.stdin.as_mut() {
                let _ = w.write_all(b"{\"cmd\":\"shutdown\"}\n");
                let _ = w.flush();
            }
        }
        self.stdin = None;
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            match self.child.try_wait() {
                Ok(Some(_)) => return,
                Ok(None) => thread::sleep(Duration::from_millis(10)),
                Err(_) => break,
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
