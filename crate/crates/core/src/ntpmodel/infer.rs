use super::net::{NtpModel, StateInput, FLAT_APIS};
use crate::error::NtpError;
use crate::numcore::{argmax, sigmoid, softmax, Graph, Tensor};
use crate::program::Program;
use crate::scope::{Window, NUM_LABELS};

/// Evaluated core outputs for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreOutput {
    /// Probability that the current program should return.
    pub eop: f64,
    /// Program key, or API logits for flat variants.
    pub head: Vec<f64>,
    pub hidden: Option<Tensor>,
}

/// Index of the memory row with the highest dot product against `key`;
/// ties go to the lower index.
pub fn memory_lookup(key: &[f64], keys: &Tensor) -> usize {
    let scores: Vec<f64> = (0..keys.rows()).map(|r| keys.row(r).iter().zip(key).map(|(a, b)| a * b).sum()).collect();
    argmax(&scores)
}

impl NtpModel {
    pub fn infer_state(&self, frame: &[f64]) -> Result<Tensor, NtpError> {
        let mut g = Graph::new(&self.store);
        let s = self.encode_state(&mut g, frame)?;
        Ok(g.value(s).clone())
    }

    pub fn infer_spec(&self, frames: &[Vec<f64>], w: Window) -> Result<Tensor, NtpError> {
        let mut g = Graph::new(&self.store);
        let c = self.encode_spec(&mut g, frames, w)?;
        Ok(g.value(c).clone())
    }

    /// One core step. `program` is ignored by flat variants; `rel` is the
    /// [`relation`](super::relation) of the current frame to the window.
    pub fn infer_core(&self, c: &Tensor, program: Option<Program>, s: &Tensor, rel: &Tensor, h: Option<&Tensor>) -> Result<CoreOutput, NtpError> {
        let mut g = Graph::new(&self.store);
        let cv = g.input(c.clone());
        let sv = g.input(s.clone());
        let rv = g.input(rel.clone());
        let p = match (self.variant().is_flat(), program) {
            (true, _) => None,
            (false, Some(p)) => Some(self.program_embedding(&mut g, p)?),
            (false, None) => return Err(NtpError::Config("hierarchical core needs a program".into())),
        };
        let hv = h.map(|h| g.input(h.clone()));
        let out = self.core_forward(&mut g, cv, p, sv, rv, hv)?;
        Ok(CoreOutput {
            eop: sigmoid(g.value(out.eop_logit).item()),
            head: g.value(out.head).data().to_vec(),
            hidden: out.hidden.map(|v| g.value(v).clone()),
        })
    }

    /// Program selected by the core head: memory lookup, or the argmax API
    /// for flat variants.
    pub fn select_program(&self, out: &CoreOutput) -> Program {
        match self.memory() {
            Some((keys, _)) => Program::ALL[memory_lookup(&out.head, self.store.value(keys))],
            None => FLAT_APIS[argmax(&out.head)],
        }
    }

    /// Per-frame label distributions over window `w` for callee `p`.
    pub fn infer_scope(&self, frames: &[Vec<f64>], w: Window, now: &[f64], p: Program, s: &Tensor) -> Result<Vec<[f64; NUM_LABELS]>, NtpError> {
        let mut g = Graph::new(&self.store);
        let pv = self.program_embedding(&mut g, p)?;
        let sv = g.input(s.clone());
        let logits = self.scope_logits(&mut g, frames, w, now, pv, sv)?;
        let t = g.value(logits);
        Ok((0..t.rows())
            .map(|r| {
                let pr = softmax(t.row(r));
                std::array::from_fn(|k| pr[k])
            })
            .collect())
    }

    /// Slot chosen by the pointer decoder.
    pub fn infer_arg(&self, frames: &[Vec<f64>], w: Window, s: &Tensor, state: &StateInput) -> Result<usize, NtpError> {
        let mut g = Graph::new(&self.store);
        let sv = g.input(s.clone());
        let (logits, ids) = self.arg_logits(&mut g, frames, w, sv, state)?;
        Ok(ids[argmax(g.value(logits).data())])
    }
}
