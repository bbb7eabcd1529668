use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::NtpError;
use crate::program::Program;
use crate::scope::{labels_for, Label, Window};
use crate::worldsim::{ApiCall, Observation};

/// Demonstration frames: frame 0 precedes the first API call and frame
/// `t + 1` follows call `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpecification {
    pub frames: Vec<Observation>,
}

impl TaskSpecification {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn full_window(&self) -> Window {
        (0, self.frames.len() - 1)
    }
}

/// One program invocation in the expert's call tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallNode {
    pub program: Program,
    /// Target index for `move_to`.
    pub arg: Option<usize>,
    /// Inclusive frame window into the root specification.
    pub window: Window,
    /// Inclusive range of API call indices issued inside this node.
    pub calls: (usize, usize),
    pub children: Vec<CallNode>,
}

impl CallNode {
    pub fn primitive(call: ApiCall, t: usize) -> CallNode {
        let (program, arg) = match call {
            ApiCall::MoveTo(x) => (Program::MoveTo, Some(x)),
            ApiCall::Grip => (Program::Grip, None),
            ApiCall::Release => (Program::Release, None),
        };
        CallNode { program, arg, window: (t + 1, t + 1), calls: (t, t), children: Vec::new() }
    }

    /// Interior node spanning its children; the window covers the frames
    /// produced by those calls.
    pub fn parent(program: Program, children: Vec<CallNode>) -> CallNode {
        let calls = (children[0].calls.0, children.last().expect("children").calls.1);
        CallNode { program, arg: None, window: (calls.0 + 1, calls.1 + 1), calls, children }
    }

    pub fn api_call(&self) -> Option<ApiCall> {
        match self.program {
            Program::MoveTo => Some(ApiCall::MoveTo(self.arg.expect("move_to carries a target"))),
            Program::Grip => Some(ApiCall::Grip),
            Program::Release => Some(ApiCall::Release),
            _ => None,
        }
    }

    /// Primitive calls in execution order.
    pub fn api_calls(&self) -> Vec<ApiCall> {
        let mut out = Vec::new();
        self.walk(&mut |n| out.extend(n.api_call()));
        out
    }

    pub fn walk(&self, f: &mut impl FnMut(&CallNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(CallNode::depth).max().unwrap_or(0)
    }

    /// Every child window lies inside its parent's, children are in temporal
    /// order and do not overlap.
    pub fn check_nesting(&self) -> Result<(), String> {
        let mut prev_end: Option<usize> = None;
        for c in &self.children {
            let (s, e) = c.window;
            if s > e || s < self.window.0 || e > self.window.1 {
                return Err(format!("{} window {:?} outside {:?}", c.program, c.window, self.window));
            }
            if prev_end.is_some_and(|p| s <= p) {
                return Err(format!("{} window {:?} overlaps its sibling", c.program, c.window));
            }
            prev_end = Some(e);
            c.check_nesting()?;
        }
        Ok(())
    }
}

/// Labels for one parent-to-child edge, over the parent's window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeLabels {
    pub parent: Program,
    pub child: Program,
    pub parent_window: Window,
    pub child_window: Window,
    pub labels: Vec<Label>,
}

/// Scoping labels for every edge whose child is itself a program, in
/// pre-order.
pub fn annotate_scoping(tree: &CallNode) -> Result<Vec<EdgeLabels>, NtpError> {
    let mut out = Vec::new();
    fn go(n: &CallNode, out: &mut Vec<EdgeLabels>) -> Result<(), NtpError> {
        for c in &n.children {
            out.push(EdgeLabels {
                parent: n.program,
                child: c.program,
                parent_window: n.window,
                child_window: c.window,
                labels: labels_for(n.window, c.window)?,
            });
            go(c, out)?;
        }
        Ok(())
    }
    go(tree, &mut out)?;
    Ok(out)
}

/// Supervision attached to one trace step. Exactly one of `eop`,
/// `labels` (non-primitive callee) or the primitive call is the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub next_program: Option<Program>,
    pub eop: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub labels: Option<Vec<Label>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub args: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Identifies the program invocation this step belongs to.
    pub invocation: usize,
    pub depth: usize,
    pub window: Window,
    pub program: Program,
    pub obs: Observation,
    pub targets: Targets,
}

/// Flattens the call tree into supervised steps. Each program invocation
/// contributes one step per callee plus a final end-of-program step.
pub fn trace_steps(tree: &CallNode, spec: &TaskSpecification) -> Result<Vec<TraceStep>, NtpError> {
    let mut out = Vec::new();
    let mut next_id = 0;
    fn go(
        n: &CallNode,
        depth: usize,
        spec: &TaskSpecification,
        out: &mut Vec<TraceStep>,
        next_id: &mut usize,
    ) -> Result<(), NtpError> {
        if n.program.is_primitive() {
            return Ok(());
        }
        let id = *next_id;
        *next_id += 1;
        for c in &n.children {
            let targets = if c.program.is_primitive() {
                Targets { next_program: Some(c.program), eop: false, labels: None, args: c.arg }
            } else {
                Targets { next_program: Some(c.program), eop: false, labels: Some(labels_for(n.window, c.window)?), args: None }
            };
            out.push(TraceStep { invocation: id, depth, window: n.window, program: n.program, obs: spec.frames[c.calls.0].clone(), targets });
            go(c, depth + 1, spec, out, next_id)?;
        }
        out.push(TraceStep {
            invocation: id,
            depth,
            window: n.window,
            program: n.program,
            obs: spec.frames[n.calls.1 + 1].clone(),
            targets: Targets { next_program: None, eop: true, labels: None, args: None },
        });
        Ok(())
    }
    go(tree, 0, spec, &mut out, &mut next_id)?;
    Ok(out)
}

pub fn write_trace<W: Write>(steps: &[TraceStep], mut out: W) -> Result<(), NtpError> {
    for s in steps {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceStep>, NtpError> {
    let mut steps = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            steps.push(serde_json::from_str(&line)?);
        }
    }
    Ok(steps)
}
