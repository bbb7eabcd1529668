use serde::{Deserialize, Serialize};

use crate::error::NtpError;
use crate::expert::Demonstration;
use crate::features::frame_features;
use crate::ntpmodel::{StateInput, Variant};
use crate::program::{Program, NUM_PROGRAMS};
use crate::scope::{label_targets, Window, NUM_LABELS};
use crate::worldsim::{ApiCall, SlotLayout};

/// Featurized demonstration shared by all of its steps.
#[derive(Clone, Debug, PartialEq)]
pub struct DemoFeatures {
    pub frames: Vec<Vec<f64>>,
    pub layout: SlotLayout,
}

/// Slot descriptors are only kept where the pointer is supervised.
fn step_state(obs: &[f64], layout: &SlotLayout, pointer: bool) -> StateInput {
    let mut s = StateInput::new(obs, layout);
    if !pointer {
        s.slots = Vec::new();
        s.valid = Vec::new();
    }
    s
}

/// Supervision for one step; exactly one of "return" or "call `next`".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTarget {
    /// `None` means the current program should return.
    pub next: Option<Program>,
    /// Soft scoping targets over the current window, for scoped callees.
    pub scope: Option<Vec<[f64; NUM_LABELS]>>,
    /// Pointer target slot for `move_to`.
    pub arg: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub demo: usize,
    pub invocation: usize,
    /// Program running when this step is taken.
    pub program: Program,
    pub window: Window,
    pub state: StateInput,
    pub target: StepTarget,
}

/// Training steps grouped by governing program, with the running error
/// statistic that drives the curriculum.
#[derive(Clone, Debug)]
pub struct TraceDataset {
    pub variant: Variant,
    pub demos: Vec<DemoFeatures>,
    pub steps: Vec<Step>,
    /// Step ids of each invocation, in execution order.
    pub invocations: Vec<Vec<usize>>,
    /// Per-program error statistic, indexed by program id.
    pub errors: [f64; NUM_PROGRAMS],
    /// Sampling units per program id: invocations for recurrent variants,
    /// single steps otherwise.
    pub units: Vec<Vec<Vec<usize>>>,
}

impl TraceDataset {
    pub fn from_demos(demos: &[Demonstration], variant: Variant) -> Result<Self, NtpError> {
        if demos.is_empty() {
            return Err(NtpError::EmptyDataset);
        }
        let mut ds = TraceDataset {
            variant,
            demos: Vec::with_capacity(demos.len()),
            steps: Vec::new(),
            invocations: Vec::new(),
            errors: [1.0; NUM_PROGRAMS],
            units: vec![Vec::new(); NUM_PROGRAMS],
        };
        for (i, d) in demos.iter().enumerate() {
            let layout = SlotLayout::for_task(&d.task);
            let frames: Vec<Vec<f64>> = d.spec.frames.iter().map(|o| frame_features(o, &layout)).collect();
            if variant.is_flat() {
                ds.push_flat(i, d, &layout);
            } else {
                ds.push_hierarchical(i, d, &layout)?;
            }
            ds.demos.push(DemoFeatures { frames, layout });
        }
        for inv in &ds.invocations {
            let p = ds.steps[inv[0]].program.id();
            if variant.is_recurrent() {
                ds.units[p].push(inv.clone());
            } else {
                ds.units[p].extend(inv.iter().map(|&k| vec![k]));
            }
        }
        Ok(ds)
    }

    fn push_hierarchical(&mut self, demo: usize, d: &Demonstration, layout: &SlotLayout) -> Result<(), NtpError> {
        let base = self.invocations.len();
        let full = d.spec.full_window();
        let scoped = self.variant.scopes();
        for t in d.trace()? {
            let inv = base + t.invocation;
            if self.invocations.len() <= inv {
                self.invocations.resize(inv + 1, Vec::new());
            }
            self.invocations[inv].push(self.steps.len());
            let scope = if scoped { t.targets.labels.as_deref().map(label_targets) } else { None };
            self.steps.push(Step {
                demo,
                invocation: inv,
                program: t.program,
                window: if scoped { t.window } else { full },
                state: step_state(&t.obs, layout, t.targets.args.is_some()),
                target: StepTarget { next: t.targets.next_program, scope, arg: t.targets.args },
            });
        }
        Ok(())
    }

    /// One invocation per demonstration: the root program emitting API calls
    /// directly, then returning.
    fn push_flat(&mut self, demo: usize, d: &Demonstration, layout: &SlotLayout) {
        let inv = self.invocations.len();
        let root = d.task.family().root_program();
        let full = d.spec.full_window();
        let mut ids = Vec::with_capacity(d.api_log.len() + 1);
        let targets = d.api_log.iter().map(|c| match *c {
            ApiCall::MoveTo(k) => (Some(Program::MoveTo), Some(k)),
            ApiCall::Grip => (Some(Program::Grip), None),
            ApiCall::Release => (Some(Program::Release), None),
        });
        for (t, (next, arg)) in targets.chain(std::iter::once((None, None))).enumerate() {
            ids.push(self.steps.len());
            self.steps.push(Step {
                demo,
                invocation: inv,
                program: root,
                window: full,
                state: step_state(&d.spec.frames[t], layout, arg.is_some()),
                target: StepTarget { next, scope: None, arg },
            });
        }
        self.invocations.push(ids);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}
