//! Deterministic kinematic tabletop with the three robot primitives.
//!
//! Objects rest on the table, on other objects, or in containers. Physics is
//! replaced by fixed rules: a grip takes the topmost clear object whose grasp
//! point is within 2 cm of the gripper, and a release drops the held object
//! onto the topmost surface below.

mod adversary;
mod layout;
mod state;

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adversary::{apply_adversary, stacks};
pub use layout::{bowl_slot, fork_slot, sorting_slot, EntityKind, SlotDesc, SlotLayout, BIN_SLOT};
pub use state::*;

use crate::error::NtpError;
use crate::taskgen::TaskInstance;

/// A world plus its event log and optional adversary, as seen by a policy.
#[derive(Clone, Debug)]
pub struct Environment {
    pub state: WorldState,
    pub log: Vec<ApiEvent>,
    adversary: Option<(f64, ChaCha8Rng)>,
    deferred: bool,
    pending: bool,
    pub topples: usize,
}

impl Environment {
    pub fn new(task: &TaskInstance, seed: u64) -> Result<Self, NtpError> {
        Ok(Environment { state: reset(task, seed)?, log: Vec::new(), adversary: None, deferred: false, pending: false, topples: 0 })
    }

    /// Enables toppling after every release with probability `prob`.
    pub fn with_adversary(mut self, prob: f64, seed: u64) -> Self {
        self.adversary = Some((prob, ChaCha8Rng::seed_from_u64(seed)));
        self
    }

    /// Holds each release's topple back until [`Environment::settle`] is
    /// called, so a hierarchical policy sees it once the placing skill has
    /// returned rather than in the middle of it.
    pub fn defer_adversary(&mut self, deferred: bool) {
        self.deferred = deferred;
    }

    /// Applies a topple held back by deferral. Returns whether one happened.
    pub fn settle(&mut self) -> Result<bool, NtpError> {
        if !std::mem::take(&mut self.pending) {
            return Ok(false);
        }
        self.perturb()
    }

    fn perturb(&mut self) -> Result<bool, NtpError> {
        let Some((p, rng)) = self.adversary.as_mut() else { return Ok(false) };
        let hit = apply_adversary(&mut self.state, rng, *p)?;
        self.topples += usize::from(hit);
        Ok(hit)
    }

    pub fn observe(&self) -> Observation {
        self.state.observe()
    }

    pub fn call(&mut self, api: ApiCall) -> Result<&ApiEvent, NtpError> {
        let event = self.state.step_api(api)?;
        self.log.push(event);
        if api == ApiCall::Release {
            if self.deferred {
                self.pending = true;
            } else {
                self.perturb()?;
            }
        }
        Ok(self.log.last().expect("just pushed"))
    }
}

/// Replays API calls from a fresh reset.
pub fn replay(task: &TaskInstance, seed: u64, calls: &[ApiCall]) -> Result<WorldState, NtpError> {
    let mut w = reset(task, seed)?;
    for &c in calls {
        w.step_api(c)?;
    }
    Ok(w)
}

pub fn write_event_log<W: Write>(events: &[ApiEvent], mut out: W) -> Result<(), NtpError> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_event_log<R: BufRead>(input: R) -> Result<Vec<ApiEvent>, NtpError> {
    let mut events = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            events.push(serde_json::from_str(&line)?);
        }
    }
    Ok(events)
}
