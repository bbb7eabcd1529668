//! Recursive program runtime: each frame loops on its controller until the
//! end-of-program probability reaches `alpha`, dispatching APIs to the
//! environment and recursing into scoped sub-programs. Hard caps turn
//! runaway executions into recorded terminations.

mod controller;

pub use controller::*;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::NtpError;
use crate::expert::{CallNode, TaskSpecification};
use crate::features::frame_features;
use crate::program::Program;
use crate::scope::Window;
use crate::taskgen::{success, TaskInstance};
use crate::worldsim::{ApiCall, Environment, Observation, SlotLayout};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    pub alpha: f64,
    pub max_depth: usize,
    pub max_api_calls: usize,
    pub max_iterations_per_frame: usize,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig { alpha: 0.5, max_depth: 6, max_api_calls: 500, max_iterations_per_frame: 50 }
    }
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<(), NtpError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(NtpError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.max_depth == 0 || self.max_api_calls == 0 || self.max_iterations_per_frame == 0 {
            return Err(NtpError::Config("runtime caps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    DepthExceeded,
    BudgetExceeded,
    IterationCapExceeded,
    /// The controller issued a call the world rejects.
    InvalidApiCall,
}

impl Termination {
    pub const ALL: [Termination; 5] = [
        Termination::Completed,
        Termination::DepthExceeded,
        Termination::BudgetExceeded,
        Termination::IterationCapExceeded,
        Termination::InvalidApiCall,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::DepthExceeded => "depth_exceeded",
            Termination::BudgetExceeded => "budget_exceeded",
            Termination::IterationCapExceeded => "iteration_cap_exceeded",
            Termination::InvalidApiCall => "invalid_api_call",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub success: bool,
    pub termination: Termination,
    pub api_log: Vec<ApiCall>,
    pub call_tree: CallNode,
    pub topples: usize,
}

/// One executed decision, in the expert trace layout plus predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecStep {
    pub invocation: usize,
    pub depth: usize,
    pub window: Window,
    pub program: Program,
    pub obs: Observation,
    pub eop_prob: f64,
    pub next_program: Option<Program>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scope: Option<Window>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub args: Option<usize>,
}

pub fn write_exec_trace<W: Write>(steps: &[ExecStep], mut out: W) -> Result<(), NtpError> {
    for s in steps {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

struct Runtime<'a> {
    env: &'a mut Environment,
    ctl: &'a dyn Controller,
    spec: SpecView,
    cfg: RuntimeConfig,
    api_log: Vec<ApiCall>,
    trace: Option<Vec<ExecStep>>,
    invocations: usize,
}

enum Flow {
    Return,
    Halt(Termination),
}

impl Runtime<'_> {
    fn frame(&mut self, program: Program, window: Window, depth: usize) -> Result<(Flow, CallNode), NtpError> {
        let invocation = self.invocations;
        self.invocations += 1;
        let first_call = self.api_log.len();
        let mut node = CallNode { program, arg: None, window, calls: (first_call, first_call), children: Vec::new() };
        let mut mem = FrameMemory::default();
        let cap = if self.ctl.is_flat() { self.cfg.max_api_calls } else { self.cfg.max_iterations_per_frame };
        let flow = loop {
            if mem.iteration >= cap {
                break Flow::Halt(Termination::IterationCapExceeded);
            }
            let obs = self.env.observe();
            let q = Query { program, window, obs: &obs, spec: &self.spec };
            let d = self.ctl.decide(&q, &mut mem)?;
            mem.iteration += 1;
            let done = d.eop >= self.cfg.alpha;
            if let Some(t) = self.trace.as_mut() {
                t.push(ExecStep {
                    invocation,
                    depth,
                    window,
                    program,
                    obs: obs.clone(),
                    eop_prob: d.eop,
                    next_program: (!done).then_some(d.next),
                    scope: (!done && !d.next.is_primitive()).then_some(d.scope),
                    args: if done { None } else { d.arg },
                });
            }
            if done {
                break Flow::Return;
            }
            if d.next.is_primitive() {
                let call = match d.next {
                    Program::MoveTo => match d.arg {
                        Some(k) => ApiCall::MoveTo(k),
                        None => break Flow::Halt(Termination::InvalidApiCall),
                    },
                    Program::Grip => ApiCall::Grip,
                    _ => ApiCall::Release,
                };
                if self.api_log.len() >= self.cfg.max_api_calls {
                    break Flow::Halt(Termination::BudgetExceeded);
                }
                match self.env.call(call) {
                    Ok(_) => {}
                    Err(NtpError::ApiArgument(_)) => break Flow::Halt(Termination::InvalidApiCall),
                    Err(e) => return Err(e),
                }
                node.children.push(CallNode::primitive(call, self.api_log.len()));
                self.api_log.push(call);
                continue;
            }
            if depth + 1 > self.cfg.max_depth {
                break Flow::Halt(Termination::DepthExceeded);
            }
            let (flow, child) = self.frame(d.next, d.scope, depth + 1)?;
            node.children.push(child);
            if let Flow::Halt(t) = flow {
                break Flow::Halt(t);
            }
        };
        node.calls = (first_call, self.api_log.len().max(first_call + 1) - 1);
        if matches!(flow, Flow::Return) {
            self.env.settle()?;
        }
        Ok((flow, node))
    }
}

/// Executes `program` on `env` conditioned on the specification `spec` of
/// `task`. Cap violations end the run and are reported in the result.
pub fn run(
    task: &TaskInstance,
    program: Program,
    spec: &TaskSpecification,
    env: &mut Environment,
    ctl: &dyn Controller,
    cfg: &RuntimeConfig,
) -> Result<RunResult, NtpError> {
    run_traced(task, program, spec, env, ctl, cfg, false).map(|(r, _)| r)
}

/// [`run`] that optionally records every decision.
pub fn run_traced(
    task: &TaskInstance,
    program: Program,
    spec: &TaskSpecification,
    env: &mut Environment,
    ctl: &dyn Controller,
    cfg: &RuntimeConfig,
    record: bool,
) -> Result<(RunResult, Vec<ExecStep>), NtpError> {
    cfg.validate()?;
    if spec.is_empty() {
        return Err(NtpError::EmptySpec);
    }
    let spec_view = SpecView::new(spec, SlotLayout::for_task(task));
    // A flat policy has no placing frame to wait for.
    env.defer_adversary(!ctl.is_flat());
    let mut rt = Runtime {
        env,
        ctl,
        spec: spec_view,
        cfg: *cfg,
        api_log: Vec::new(),
        trace: record.then(Vec::new),
        invocations: 0,
    };
    let (flow, call_tree) = rt.frame(program, spec.full_window(), 0)?;
    let termination = match flow {
        Flow::Return => Termination::Completed,
        Flow::Halt(t) => t,
    };
    rt.env.settle()?;
    let result = RunResult {
        success: success(&rt.env.state, task),
        termination,
        api_log: rt.api_log,
        call_tree,
        topples: rt.env.topples,
    };
    Ok((result, rt.trace.unwrap_or_default()))
}

/// Featurized specification shared by every decision of a run.
#[derive(Clone, Debug)]
pub struct SpecView {
    pub frames: Vec<Vec<f64>>,
    pub layout: SlotLayout,
}

impl SpecView {
    pub fn new(spec: &TaskSpecification, layout: SlotLayout) -> Self {
        SpecView { frames: spec.frames.iter().map(|o| frame_features(o, &layout)).collect(), layout }
    }
}

#[cfg(test)]
mod tests;
