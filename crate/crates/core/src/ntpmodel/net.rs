use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, Variant};
use crate::error::NtpError;
use crate::features::{compare, frame_features, slot_features, ENC_DIM, REL_DIM, SLOT_DIM};
use crate::numcore::{gru_cell, Graph, GruParams, ParamId, ParamStore, Tensor, Var};
use crate::program::{Program, NUM_PROGRAMS};
use crate::scope::{Window, NUM_LABELS};
use crate::worldsim::SlotLayout;

/// Primitive APIs in the order of the flat baselines' API head.
pub const FLAT_APIS: [Program; 3] = [Program::MoveTo, Program::Grip, Program::Release];

/// Featurized environment observation.
#[derive(Clone, Debug, PartialEq)]
pub struct StateInput {
    pub frame: Vec<f64>,
    pub slots: Vec<f64>,
    pub valid: Vec<bool>,
}

impl StateInput {
    pub fn new(obs: &[f64], layout: &SlotLayout) -> Self {
        let (slots, valid) = slot_features(obs, layout);
        StateInput { frame: frame_features(obs, layout), slots, valid }
    }
}

/// Encoder features of each frame of `w` next to their [`compare`] with the
/// current frame `now`.
pub fn scope_frames(frames: &[Vec<f64>], w: Window, now: &[f64]) -> Tensor {
    let n = w.1 - w.0 + 1;
    let mut data = Vec::with_capacity(n * SCOPE_DIM);
    for f in &frames[w.0..=w.1] {
        data.extend_from_slice(&f[..ENC_DIM]);
        data.extend(compare(f, now));
    }
    Tensor::matrix(n, SCOPE_DIM, data)
}

/// Per-frame input width of the scoping convolution.
pub const SCOPE_DIM: usize = ENC_DIM + REL_DIM;

/// Encoder features of `w`, one row per frame.
pub fn window_frames(frames: &[Vec<f64>], w: Window) -> Tensor {
    let n = w.1 - w.0 + 1;
    Tensor::matrix(n, ENC_DIM, frames[w.0..=w.1].iter().flat_map(|f| f[..ENC_DIM].iter().copied()).collect())
}

/// [`compare`] of the current frame with the first and the last frame of `w`.
pub fn relation(frames: &[Vec<f64>], w: Window, now: &[f64]) -> Tensor {
    let mut v = compare(now, &frames[w.0]);
    v.extend(compare(now, &frames[w.1]));
    Tensor::vector(v)
}

/// Elementwise maximum of the encoder features over `w`.
pub fn window_max(frames: &[Vec<f64>], w: Window) -> Vec<f64> {
    let mut m = frames[w.0][..ENC_DIM].to_vec();
    for f in &frames[w.0 + 1..=w.1] {
        for (a, b) in m.iter_mut().zip(f) {
            *a = a.max(*b);
        }
    }
    m
}

#[derive(Clone, Copy, Debug)]
struct Dense {
    w: ParamId,
    b: ParamId,
}

impl Dense {
    fn new(store: &mut ParamStore, name: &str, out: usize, inp: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense { w: store.insert_weight(&format!("{name}.w"), out, inp, rng), b: store.insert_bias(&format!("{name}.b"), out) }
    }

    fn apply(&self, g: &mut Graph, x: Var, relu: bool) -> Result<Var, NtpError> {
        crate::numcore::dense(g, x, self.w, self.b, relu)
    }

    fn conv(&self, g: &mut Graph, seq: Var, width: usize) -> Result<Var, NtpError> {
        let (w, b) = (g.param(self.w), g.param(self.b));
        let y = g.conv1d(seq, w, b, width)?;
        Ok(g.relu(y))
    }
}

#[derive(Clone, Copy, Debug)]
enum Core {
    Mlp(Dense),
    Gru(GruParams),
}

#[derive(Clone, Copy, Debug)]
struct Tsi {
    conv: Dense,
    y: ParamId,
    p: ParamId,
    s: ParamId,
    b: ParamId,
    out: Dense,
}

#[derive(Clone, Copy, Debug)]
struct Pointer {
    slot: ParamId,
    window: ParamId,
    s: ParamId,
    b: ParamId,
    out: Dense,
}

#[derive(Clone, Copy, Debug)]
struct Handles {
    enc1: Dense,
    enc2: Dense,
    tse_conv: Dense,
    tse_out: Dense,
    core: Core,
    head: Dense,
    eop: Dense,
    m_key: Option<ParamId>,
    m_prog: Option<ParamId>,
    tsi: Option<Tsi>,
    ptr: Pointer,
}

/// Outputs of the core network for one step.
#[derive(Clone, Copy, Debug)]
pub struct CoreVars {
    /// Program key (hierarchical variants) or API logits (flat variants).
    pub head: Var,
    pub eop_logit: Var,
    pub hidden: Option<Var>,
}

/// Learnable networks of one model variant.
#[derive(Clone, Debug)]
pub struct NtpModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    h: Handles,
}

impl NtpModel {
    pub fn new(config: ModelConfig) -> Result<Self, NtpError> {
        config.validate()?;
        let c = &config;
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let mut st = ParamStore::new();
        let flat = c.variant.is_flat();
        let enc1 = Dense::new(&mut st, "enc.l1", c.state_dim, ENC_DIM, &mut rng);
        let enc2 = Dense::new(&mut st, "enc.l2", c.state_dim, c.state_dim, &mut rng);
        let tse_conv = Dense::new(&mut st, "tse.conv", c.conv_channels, ENC_DIM * c.conv_width, &mut rng);
        let tse_out = Dense::new(&mut st, "tse.out", c.spec_dim, c.conv_channels, &mut rng);
        let core_in = c.spec_dim + c.state_dim + 2 * REL_DIM + if flat { 0 } else { c.prog_dim };
        let core = if c.variant.is_recurrent() {
            Core::Gru(GruParams::register(&mut st, "core.gru", core_in, c.core_hidden, &mut rng))
        } else {
            Core::Mlp(Dense::new(&mut st, "core.l1", c.core_hidden, core_in, &mut rng))
        };
        let head_out = if flat { FLAT_APIS.len() } else { c.key_dim };
        let head = Dense::new(&mut st, "core.head", head_out, c.core_hidden, &mut rng);
        let eop = Dense::new(&mut st, "core.eop", 1, c.core_hidden, &mut rng);
        let (m_key, m_prog) = if flat {
            (None, None)
        } else {
            (
                Some(st.insert_weight("memory.key", NUM_PROGRAMS, c.key_dim, &mut rng)),
                Some(st.insert_weight("memory.prog", NUM_PROGRAMS, c.prog_dim, &mut rng)),
            )
        };
        let tsi = c.variant.scopes().then(|| Tsi {
            conv: Dense::new(&mut st, "tsi.conv", c.conv_channels, SCOPE_DIM * c.conv_width, &mut rng),
            y: st.insert_weight("tsi.hidden.y", c.tsi_hidden, c.conv_channels, &mut rng),
            p: st.insert_weight("tsi.hidden.p", c.tsi_hidden, c.prog_dim, &mut rng),
            s: st.insert_weight("tsi.hidden.s", c.tsi_hidden, c.state_dim, &mut rng),
            b: st.insert_bias("tsi.hidden.b", c.tsi_hidden),
            out: Dense::new(&mut st, "tsi.out", NUM_LABELS, c.tsi_hidden, &mut rng),
        });
        let ptr = Pointer {
            slot: st.insert_weight("args.slot", c.ptr_hidden, SLOT_DIM, &mut rng),
            window: st.insert_weight("args.window", c.ptr_hidden, ENC_DIM, &mut rng),
            s: st.insert_weight("args.state", c.ptr_hidden, c.state_dim, &mut rng),
            b: st.insert_bias("args.b", c.ptr_hidden),
            out: Dense::new(&mut st, "args.out", 1, c.ptr_hidden, &mut rng),
        };
        let h = Handles { enc1, enc2, tse_conv, tse_out, core, head, eop, m_key, m_prog, tsi, ptr };
        Ok(NtpModel { config, store: st, h })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    /// Two-layer relu encoder of the frame features.
    pub fn encode_state(&self, g: &mut Graph, frame: &[f64]) -> Result<Var, NtpError> {
        let x = g.input(Tensor::vector(frame[..ENC_DIM].to_vec()));
        let h = self.h.enc1.apply(g, x, true)?;
        self.h.enc2.apply(g, h, true)
    }

    /// Temporal convolution, max over time, dense projection.
    pub fn encode_spec(&self, g: &mut Graph, frames: &[Vec<f64>], w: Window) -> Result<Var, NtpError> {
        if frames.is_empty() || w.1 < w.0 || w.1 >= frames.len() {
            return Err(NtpError::EmptySpec);
        }
        let x = g.input(window_frames(frames, w));
        let y = self.h.tse_conv.conv(g, x, self.config.conv_width)?;
        let pooled = g.max_rows(y)?;
        self.h.tse_out.apply(g, pooled, true)
    }

    pub fn program_embedding(&self, g: &mut Graph, p: Program) -> Result<Var, NtpError> {
        let m = self.h.m_prog.ok_or_else(|| NtpError::Config("flat variants have no program memory".into()))?;
        let mv = g.param(m);
        g.row(mv, p.id())
    }

    /// Scores of every memory key against `key`.
    pub fn key_logits(&self, g: &mut Graph, key: Var) -> Result<Var, NtpError> {
        let m = self.h.m_key.ok_or_else(|| NtpError::Config("flat variants have no program memory".into()))?;
        let mv = g.param(m);
        g.linear(key, mv, None)
    }

    pub fn zero_hidden(&self) -> Tensor {
        Tensor::zeros(&[self.config.core_hidden])
    }

    /// Core network over `[c; p; s; rel]` (no `p` for flat variants), where
    /// `rel` is the [`relation`] of the current frame to the window.
    pub fn core_forward(&self, g: &mut Graph, c: Var, p: Option<Var>, s: Var, rel: Var, h_prev: Option<Var>) -> Result<CoreVars, NtpError> {
        let x = match p {
            Some(p) => g.concat(&[c, p, s, rel])?,
            None => g.concat(&[c, s, rel])?,
        };
        let (hid, hidden) = match self.h.core {
            Core::Mlp(d) => (d.apply(g, x, true)?, None),
            Core::Gru(gp) => {
                let h0 = match h_prev {
                    Some(h) => h,
                    None => g.input(self.zero_hidden()),
                };
                let h = gru_cell(g, x, h0, &gp)?;
                (h, Some(h))
            }
        };
        Ok(CoreVars { head: self.h.head.apply(g, hid, false)?, eop_logit: self.h.eop.apply(g, hid, false)?, hidden })
    }

    /// Per-frame scoping logits `[n × 4]` over window `w`, given the current
    /// frame features `now`.
    pub fn scope_logits(&self, g: &mut Graph, frames: &[Vec<f64>], w: Window, now: &[f64], p: Var, s: Var) -> Result<Var, NtpError> {
        let t = self.h.tsi.ok_or_else(|| NtpError::Config(format!("{} has no scoping head", self.variant())))?;
        if frames.is_empty() || w.1 < w.0 || w.1 >= frames.len() {
            return Err(NtpError::EmptySpec);
        }
        let x = g.input(scope_frames(frames, w, now));
        let y = t.conv.conv(g, x, self.config.conv_width)?;
        let (wy, wp, ws, b) = (g.param(t.y), g.param(t.p), g.param(t.s), g.param(t.b));
        let sp = g.linear(p, wp, Some(b))?;
        let ss = g.linear(s, ws, None)?;
        let shared = g.add(sp, ss)?;
        let hy = g.linear(y, wy, None)?;
        let pre = g.add_row_bias(hy, shared)?;
        let hid = g.relu(pre);
        t.out.apply(g, hid, false)
    }

    /// Pointer logits over the slots present in the world, with the slot id
    /// of each logit.
    pub fn arg_logits(
        &self,
        g: &mut Graph,
        frames: &[Vec<f64>],
        w: Window,
        s: Var,
        state: &StateInput,
    ) -> Result<(Var, Vec<usize>), NtpError> {
        let ids: Vec<usize> = (0..state.valid.len()).filter(|&k| state.valid[k]).collect();
        if ids.is_empty() {
            return Err(NtpError::ApiArgument("no entity to point at".into()));
        }
        let rows: Vec<f64> = ids.iter().flat_map(|&k| state.slots[k * SLOT_DIM..(k + 1) * SLOT_DIM].iter().copied()).collect();
        let p = self.h.ptr;
        let gx = g.input(Tensor::matrix(ids.len(), SLOT_DIM, rows));
        let wx = g.input(Tensor::vector(window_max(frames, w)));
        let (wslot, wwin, ws, b) = (g.param(p.slot), g.param(p.window), g.param(p.s), g.param(p.b));
        let a = g.linear(wx, wwin, Some(b))?;
        let bs = g.linear(s, ws, None)?;
        let shared = g.add(a, bs)?;
        let hs = g.linear(gx, wslot, None)?;
        let pre = g.add_row_bias(hs, shared)?;
        let hid = g.relu(pre);
        let score = p.out.apply(g, hid, false)?;
        let flat = g.reshape(score, &[ids.len()])?;
        Ok((flat, ids))
    }

    /// Overwrites parameter values by name; every parameter must be given
    /// with its exact shape.
    pub fn set_values(&mut self, values: &std::collections::BTreeMap<String, Tensor>) -> Result<(), NtpError> {
        if values.len() != self.store.len() {
            return Err(NtpError::Parse(format!("checkpoint has {} tensors, model {}", values.len(), self.store.len())));
        }
        for (name, t) in values {
            let id = self.store.id(name).ok_or_else(|| NtpError::Parse(format!("unexpected parameter {name}")))?;
            if self.store.value(id).shape() != t.shape() {
                return Err(NtpError::Parse(format!("parameter {name} has shape {:?}", t.shape())));
            }
            *self.store.value_mut(id) = t.clone();
        }
        Ok(())
    }

    pub(crate) fn memory(&self) -> Option<(ParamId, ParamId)> {
        self.h.m_key.zip(self.h.m_prog)
    }
}
