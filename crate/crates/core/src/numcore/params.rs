use std::collections::BTreeMap;

use rand::Rng;

use super::tensor::Tensor;
use crate::error::NtpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    value: Tensor,
    grad: Tensor,
    m: Tensor,
    v: Tensor,
}

/// Named learnable tensors with gradient accumulators and Adam moments.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    index: BTreeMap<String, ParamId>,
    steps: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> ParamId {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        let id = ParamId(self.entries.len());
        let shape = value.shape().to_vec();
        self.entries.push(Entry {
            name: name.to_string(),
            grad: Tensor::zeros(&shape),
            m: Tensor::zeros(&shape),
            v: Tensor::zeros(&shape),
            value,
        });
        self.index.insert(name.to_string(), id);
        id
    }

    /// Weight matrix `[out, inp]` drawn from U(±sqrt(6 / (inp + out))).
    pub fn insert_weight<R: Rng>(&mut self, name: &str, out: usize, inp: usize, rng: &mut R) -> ParamId {
        let bound = (6.0 / (inp + out) as f64).sqrt();
        let data = (0..out * inp).map(|_| rng.gen_range(-bound..bound)).collect();
        self.insert(name, Tensor::matrix(out, inp, data))
    }

    pub fn insert_bias(&mut self, name: &str, n: usize) -> ParamId {
        self.insert(name, Tensor::zeros(&[n]))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].grad
    }

    pub fn num_values(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn adam_steps(&self) -> u64 {
        self.steps
    }

    /// Parameters in name order, for serialization.
    pub fn named(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.index.iter().map(move |(n, id)| (n.as_str(), &self.entries[id.0].value))
    }

    pub fn accumulate(&mut self, grads: &Gradients) -> Result<(), NtpError> {
        for (id, g) in grads.iter() {
            let entry = &mut self.entries[id.0];
            if entry.grad.shape() != g.shape() {
                return Err(NtpError::Shape(format!(
                    "gradient for {} has shape {:?}, parameter {:?}",
                    entry.name,
                    g.shape(),
                    entry.grad.shape()
                )));
            }
            entry.grad.add_assign(g);
        }
        Ok(())
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for e in &mut self.entries {
            e.grad.data_mut().iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    /// One Adam update with bias correction; gradients are zeroed afterwards.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<(), NtpError> {
        for e in &self.entries {
            if !e.grad.all_finite() {
                return Err(NtpError::Divergence(format!("non-finite gradient in {}", e.name)));
            }
        }
        self.steps += 1;
        let t = self.steps as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for e in &mut self.entries {
            let g = e.grad.data();
            let m = e.m.data_mut();
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            }
            let v = e.v.data_mut();
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            }
            let (m, v) = (e.m.data(), e.v.data());
            for ((w, mi), vi) in e.value.data_mut().iter_mut().zip(m).zip(v) {
                let mhat = mi / c1;
                let vhat = vi / c2;
                *w -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
            }
            e.grad.fill(0.0);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Sparse per-parameter gradients produced by one backward pass.
///
/// Merging is a plain sum, so the order in which per-step gradients are
/// combined only matters up to floating-point association.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    slots: BTreeMap<ParamId, Tensor>,
}

impl Gradients {
    pub fn add(&mut self, id: ParamId, g: Tensor) {
        match self.slots.get_mut(&id) {
            Some(acc) => acc.add_assign(&g),
            None => {
                self.slots.insert(id, g);
            }
        }
    }

    pub fn merge(&mut self, other: Gradients) {
        for (id, g) in other.slots {
            self.add(id, g);
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.slots.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.slots.iter().map(|(k, v)| (*k, v))
    }
}
