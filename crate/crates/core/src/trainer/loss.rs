use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::dataset::{Step, TraceDataset};
use crate::error::NtpError;
use crate::ntpmodel::{relation, NtpModel, FLAT_APIS};
use crate::numcore::{argmax, softmax, Gradients, Graph, ParamStore, Tensor, Var};
use crate::program::Program;
use crate::scope::{decode_scope, Window, NUM_LABELS};

/// Head weights and the scoping reduction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub key_weight: f64,
    pub eop_weight: f64,
    pub scope_weight: f64,
    pub arg_weight: f64,
    /// Average the scoping CE over window positions instead of summing.
    pub scope_mean: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { key_weight: 1.0, eop_weight: 1.0, scope_weight: 1.0, arg_weight: 1.0, scope_mean: true }
    }
}

/// Per-head losses, averaged over the steps of a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub program_key_ce: f64,
    pub eop_bce: f64,
    pub scoping_ce: f64,
    pub api_arg_ce: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn add(&mut self, o: &LossBreakdown) {
        self.program_key_ce += o.program_key_ce;
        self.eop_bce += o.eop_bce;
        self.scoping_ce += o.scoping_ce;
        self.api_arg_ce += o.api_arg_ce;
        self.total += o.total;
    }

    pub fn scaled(&self, k: f64) -> LossBreakdown {
        LossBreakdown {
            program_key_ce: self.program_key_ce * k,
            eop_bce: self.eop_bce * k,
            scoping_ce: self.scoping_ce * k,
            api_arg_ce: self.api_arg_ce * k,
            total: self.total * k,
        }
    }

    pub fn is_valid(&self) -> bool {
        let v = [self.program_key_ce, self.eop_bce, self.scoping_ce, self.api_arg_ce, self.total];
        v.iter().all(|x| x.is_finite() && *x >= 0.0)
    }
}

/// Correct/total counts per head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeadCounts {
    pub key: (usize, usize),
    pub eop: (usize, usize),
    pub scope: (usize, usize),
    pub arg: (usize, usize),
}

impl HeadCounts {
    pub fn add(&mut self, o: &HeadCounts) {
        for (a, b) in [(&mut self.key, o.key), (&mut self.eop, o.eop), (&mut self.scope, o.scope), (&mut self.arg, o.arg)] {
            a.0 += b.0;
            a.1 += b.1;
        }
    }
}

/// Accuracy of a count pair; a head with no samples counts as perfect.
pub fn accuracy(c: (usize, usize)) -> f64 {
    if c.1 == 0 {
        1.0
    } else {
        c.0 as f64 / c.1 as f64
    }
}

/// Raw head outputs of one step.
#[derive(Clone, Debug)]
pub struct HeadVars {
    /// Next-program logits (program memory scores or flat API logits).
    pub next_logits: Option<Var>,
    pub eop_logit: Var,
    pub scope_logits: Option<Var>,
    /// Pointer logits and the slot id of each.
    pub arg: Option<(Var, Vec<usize>)>,
}

/// Loss nodes of one step; `None` for heads without supervision.
#[derive(Clone, Copy, Debug)]
pub struct StepLoss {
    pub key: Option<Var>,
    pub eop: Var,
    pub scope: Option<Var>,
    pub arg: Option<Var>,
    pub total: Var,
}

fn next_index(flat: bool, p: Program) -> Result<usize, NtpError> {
    if flat {
        FLAT_APIS.iter().position(|a| *a == p).ok_or_else(|| NtpError::Config(format!("flat target {p} is not an API")))
    } else {
        Ok(p.id())
    }
}

/// Assembles the weighted step loss from head outputs.
pub fn step_loss(g: &mut Graph, heads: &HeadVars, step: &Step, flat: bool, cfg: &LossConfig) -> Result<StepLoss, NtpError> {
    let t = &step.target;
    let eop = g.sigmoid_bce(heads.eop_logit, if t.next.is_none() { 1.0 } else { 0.0 })?;
    let mut parts = vec![g.scale(eop, cfg.eop_weight)];
    let key = match (t.next, heads.next_logits) {
        (Some(p), Some(l)) => Some(g.softmax_ce(l, next_index(flat, p)?)?),
        (Some(_), None) => return Err(NtpError::Config("missing next-program logits".into())),
        _ => None,
    };
    if let Some(k) = key {
        parts.push(g.scale(k, cfg.key_weight));
    }
    let scope = match (&t.scope, heads.scope_logits) {
        (Some(rows), Some(l)) => {
            let n = rows.len();
            let ce = g.softmax_ce_rows(l, Tensor::matrix(n, NUM_LABELS, rows.concat()))?;
            Some(if cfg.scope_mean { ce } else { g.scale(ce, n as f64) })
        }
        (Some(_), None) => return Err(NtpError::Config("missing scoping logits".into())),
        _ => None,
    };
    if let Some(s) = scope {
        parts.push(g.scale(s, cfg.scope_weight));
    }
    let arg = match (t.arg, &heads.arg) {
        (Some(k), Some((l, ids))) => {
            let idx = ids.iter().position(|i| *i == k).ok_or_else(|| NtpError::ApiArgument(format!("target slot {k} is absent")))?;
            Some(g.softmax_ce(*l, idx)?)
        }
        (Some(_), None) => return Err(NtpError::Config("missing pointer logits".into())),
        _ => None,
    };
    if let Some(a) = arg {
        parts.push(g.scale(a, cfg.arg_weight));
    }
    let total = g.sum(&parts)?;
    Ok(StepLoss { key, eop, scope, arg, total })
}

/// Builds the forward graph of one step. `cache` shares spec encodings
/// between steps with the same demonstration and window.
fn forward_step(
    model: &NtpModel,
    g: &mut Graph,
    ds: &TraceDataset,
    step: &Step,
    h_prev: Option<Var>,
    cache: &mut HashMap<(usize, Window), Var>,
) -> Result<(HeadVars, Option<Var>), NtpError> {
    let frames = &ds.demos[step.demo].frames;
    let w = step.window;
    let c = match cache.get(&(step.demo, w)) {
        Some(c) => *c,
        None => {
            let c = model.encode_spec(g, frames, w)?;
            cache.insert((step.demo, w), c);
            c
        }
    };
    let now = &step.state.frame;
    let s = model.encode_state(g, now)?;
    let rel = g.input(relation(frames, w, now));
    let flat = model.variant().is_flat();
    let p = if flat { None } else { Some(model.program_embedding(g, step.program)?) };
    let core = model.core_forward(g, c, p, s, rel, h_prev)?;
    let next_logits = match step.target.next {
        None => None,
        Some(_) if flat => Some(core.head),
        Some(_) => Some(model.key_logits(g, core.head)?),
    };
    let scope_logits = match (step.target.next, &step.target.scope) {
        (Some(callee), Some(_)) => {
            let pc = model.program_embedding(g, callee)?;
            Some(model.scope_logits(g, frames, w, now, pc, s)?)
        }
        _ => None,
    };
    let arg = match step.target.arg {
        Some(_) => Some(model.arg_logits(g, frames, w, s, &step.state)?),
        None => None,
    };
    Ok((HeadVars { next_logits, eop_logit: core.eop_logit, scope_logits, arg }, core.hidden))
}

fn count_step(g: &Graph, heads: &HeadVars, step: &Step, flat: bool) -> Result<HeadCounts, NtpError> {
    let mut c = HeadCounts::default();
    let t = &step.target;
    let r = g.value(heads.eop_logit).item() > 0.0;
    c.eop = (usize::from(r == t.next.is_none()), 1);
    if let (Some(p), Some(l)) = (t.next, heads.next_logits) {
        c.key = (usize::from(argmax(g.value(l).data()) == next_index(flat, p)?), 1);
    }
    if let (Some(rows), Some(l)) = (&t.scope, heads.scope_logits) {
        let lt = g.value(l);
        let probs: Vec<[f64; NUM_LABELS]> = (0..lt.rows())
            .map(|r| {
                let p = softmax(lt.row(r));
                std::array::from_fn(|k| p[k])
            })
            .collect();
        c.scope = (usize::from(decode_scope(&probs) == decode_scope(rows)), 1);
    }
    if let (Some(k), Some((l, ids))) = (t.arg, &heads.arg) {
        c.arg = (usize::from(ids[argmax(g.value(*l).data())] == k), 1);
    }
    Ok(c)
}

/// Losses, gradients and accuracy counts of one batch.
#[derive(Clone, Debug)]
pub struct BatchResult {
    /// Mean per-step losses.
    pub losses: LossBreakdown,
    /// Gradients of the mean total loss.
    pub grads: Gradients,
    /// Weighted total loss of every step, in batch order.
    pub step_totals: Vec<(usize, f64)>,
    pub counts: HeadCounts,
}

/// Evaluates a batch of segments against `store`. Each segment is a list of
/// step ids sharing one graph; recurrent variants carry the hidden state
/// along a segment.
pub fn compute_losses_with(
    model: &NtpModel,
    store: &ParamStore,
    ds: &TraceDataset,
    segments: &[Vec<usize>],
    cfg: &LossConfig,
) -> Result<BatchResult, NtpError> {
    let n: usize = segments.iter().map(Vec::len).sum();
    if n == 0 {
        return Err(NtpError::EmptyDataset);
    }
    let flat = model.variant().is_flat();
    let recurrent = model.variant().is_recurrent();
    let mut out = BatchResult { losses: LossBreakdown::default(), grads: Gradients::default(), step_totals: Vec::with_capacity(n), counts: HeadCounts::default() };
    for seg in segments {
        let mut g = Graph::new(store);
        let mut cache = HashMap::new();
        let mut h = None;
        let mut totals = Vec::with_capacity(seg.len());
        for &id in seg {
            let step = &ds.steps[id];
            let (heads, hidden) = forward_step(model, &mut g, ds, step, if recurrent { h } else { None }, &mut cache)?;
            h = hidden;
            let l = step_loss(&mut g, &heads, step, flat, cfg)?;
            let v = |x: Option<Var>| x.map_or(0.0, |x| g.value(x).item());
            let b = LossBreakdown {
                program_key_ce: v(l.key),
                eop_bce: g.value(l.eop).item(),
                scoping_ce: v(l.scope),
                api_arg_ce: v(l.arg),
                total: g.value(l.total).item(),
            };
            if !b.is_valid() {
                return Err(NtpError::Divergence(format!("non-finite loss at step {id}: {b:?}")));
            }
            out.losses.add(&b);
            out.step_totals.push((id, b.total));
            out.counts.add(&count_step(&g, &heads, step, flat)?);
            totals.push(l.total);
        }
        let sum = g.sum(&totals)?;
        let root = g.scale(sum, 1.0 / n as f64);
        out.grads.merge(g.backward(root)?);
    }
    out.losses = out.losses.scaled(1.0 / n as f64);
    Ok(out)
}

/// [`compute_losses_with`] against the model's own parameters.
pub fn compute_losses(model: &NtpModel, ds: &TraceDataset, segments: &[Vec<usize>], cfg: &LossConfig) -> Result<BatchResult, NtpError> {
    compute_losses_with(model, &model.store, ds, segments, cfg)
}
