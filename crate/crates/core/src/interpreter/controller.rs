use std::collections::HashMap;

use super::SpecView;
use crate::error::NtpError;
use crate::expert::CallNode;
use crate::ntpmodel::{relation, NtpModel, StateInput};
use crate::numcore::Tensor;
use crate::program::Program;
use crate::scope::{decode_scope, Window};

/// What a controller sees at one iteration of a program frame.
pub struct Query<'a> {
    pub program: Program,
    pub window: Window,
    pub obs: &'a [f64],
    pub spec: &'a SpecView,
}

/// Per-frame scratch owned by the runtime: iteration count, recurrent state
/// and a cached spec encoding.
#[derive(Clone, Debug, Default)]
pub struct FrameMemory {
    pub iteration: usize,
    pub hidden: Option<Tensor>,
    pub spec_code: Option<Tensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub eop: f64,
    pub next: Program,
    /// Absolute window handed to a non-primitive callee.
    pub scope: Window,
    /// `move_to` target slot.
    pub arg: Option<usize>,
}

pub trait Controller: Sync {
    fn decide(&self, q: &Query, mem: &mut FrameMemory) -> Result<Decision, NtpError>;

    /// Flat controllers run a whole episode in one frame, so only the API
    /// budget bounds that frame.
    fn is_flat(&self) -> bool {
        false
    }
}

/// Drives the runtime with a trained model.
pub struct ModelController<'a> {
    pub model: &'a NtpModel,
}

impl Controller for ModelController<'_> {
    fn decide(&self, q: &Query, mem: &mut FrameMemory) -> Result<Decision, NtpError> {
        let m = self.model;
        let frames = &q.spec.frames;
        let state = StateInput::new(q.obs, &q.spec.layout);
        let s = m.infer_state(&state.frame)?;
        if mem.spec_code.is_none() {
            mem.spec_code = Some(m.infer_spec(frames, q.window)?);
        }
        let c = mem.spec_code.as_ref().expect("just set");
        let rel = relation(frames, q.window, &state.frame);
        let out = m.infer_core(c, Some(q.program), &s, &rel, mem.hidden.as_ref())?;
        mem.hidden = out.hidden.clone();
        let next = m.select_program(&out);
        let scope = if !next.is_primitive() && m.variant().scopes() {
            let (st, ed) = decode_scope(&m.infer_scope(frames, q.window, &state.frame, next, &s)?);
            (q.window.0 + st, q.window.0 + ed)
        } else {
            q.window
        };
        let arg = if next == Program::MoveTo { Some(m.infer_arg(frames, q.window, &s, &state)?) } else { None };
        Ok(Decision { eop: out.eop, next, scope, arg })
    }

    fn is_flat(&self) -> bool {
        self.model.variant().is_flat()
    }
}

/// Teacher-forced controller that reads every decision off an expert call
/// tree, keyed by program and window.
pub struct TraceOracle {
    nodes: HashMap<(Program, Window), CallNode>,
}

impl TraceOracle {
    pub fn new(tree: &CallNode) -> Self {
        let mut nodes = HashMap::new();
        tree.walk(&mut |n| {
            if !n.program.is_primitive() {
                nodes.insert((n.program, n.window), n.clone());
            }
        });
        TraceOracle { nodes }
    }
}

impl Controller for TraceOracle {
    fn decide(&self, q: &Query, mem: &mut FrameMemory) -> Result<Decision, NtpError> {
        let node = self
            .nodes
            .get(&(q.program, q.window))
            .ok_or_else(|| NtpError::Config(format!("no expert frame for {} at {:?}", q.program, q.window)))?;
        Ok(match node.children.get(mem.iteration) {
            Some(c) => Decision { eop: 0.0, next: c.program, scope: c.window, arg: c.arg },
            None => Decision { eop: 1.0, next: q.program, scope: q.window, arg: None },
        })
    }
}
