//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] records every operation applied during a forward pass. Calling
//! [`Graph::backward`] on a scalar node walks the tape in reverse and returns
//! the gradient of that scalar with respect to every parameter that took part
//! in the computation.

use std::collections::HashMap;

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{sigmoid, softmax, Tensor};
use crate::error::NtpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Linear { x: usize, w: usize, b: Option<usize> },
    AddRowBias { x: usize, bias: usize },
    Add(usize, usize),
    Mul(usize, usize),
    OneMinus(usize),
    Scale(usize, f64),
    Relu(usize),
    Sigmoid(usize),
    Tanh(usize),
    Concat(Vec<usize>),
    Slice { x: usize, start: usize },
    Row { m: usize, index: usize },
    Conv1d { seq: usize, w: usize, b: usize, width: usize },
    MaxRows { x: usize, arg: Vec<usize> },
    SoftmaxCe { logits: usize, target: Vec<f64>, probs: Vec<f64> },
    SoftmaxCeRows { logits: usize, targets: Tensor, probs: Tensor },
    SigmoidBce { logit: usize, target: f64 },
    Sum(Vec<usize>),
    Total(usize),
    Reshape(usize),
}

struct Node {
    value: Option<Tensor>,
    op: Op,
    req: bool,
}

pub struct Graph<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

fn shape_err(msg: String) -> NtpError {
    NtpError::Shape(msg)
}

impl<'a> Graph<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Graph { store, nodes: Vec::new(), params: HashMap::new() }
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    pub fn value(&self, v: Var) -> &Tensor {
        self.val(v.0)
    }

    fn val(&self, i: usize) -> &Tensor {
        match (&self.nodes[i].value, &self.nodes[i].op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.value(*id),
            _ => unreachable!("node without value"),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let req = self.op_requires(&op);
        self.nodes.push(Node { value: Some(value), op, req });
        Var(self.nodes.len() - 1)
    }

    fn op_requires(&self, op: &Op) -> bool {
        let r = |i: &usize| self.nodes[*i].req;
        match op {
            Op::Input => false,
            Op::Param(_) => true,
            Op::Linear { x, w, b } => r(x) || r(w) || b.as_ref().is_some_and(r),
            Op::AddRowBias { x, bias } => r(x) || r(bias),
            Op::Add(a, b) | Op::Mul(a, b) => r(a) || r(b),
            Op::OneMinus(a) | Op::Scale(a, _) | Op::Relu(a) | Op::Sigmoid(a) | Op::Tanh(a) => r(a),
            Op::Concat(p) | Op::Sum(p) => p.iter().any(r),
            Op::Slice { x, .. } | Op::MaxRows { x, .. } => r(x),
            Op::Row { m, .. } | Op::Total(m) | Op::Reshape(m) => r(m),
            Op::Conv1d { seq, w, b, .. } => r(seq) || r(w) || r(b),
            Op::SoftmaxCe { logits, .. } | Op::SoftmaxCeRows { logits, .. } => r(logits),
            Op::SigmoidBce { logit, .. } => r(logit),
        }
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.params.get(&id) {
            return *v;
        }
        self.nodes.push(Node { value: None, op: Op::Param(id), req: true });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    /// `x · wᵀ + b` for `x` of shape `[in]` or `[rows, in]` and `w` of shape `[out, in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, NtpError> {
        let (xt, wt) = (self.val(x.0), self.val(w.0));
        let (rows, inp) = (xt.rows(), xt.cols());
        if wt.shape().len() != 2 || wt.cols() != inp {
            return Err(shape_err(format!("linear: input {:?} vs weight {:?}", xt.shape(), wt.shape())));
        }
        let out = wt.rows();
        let mut y = vec![0.0; rows * out];
        if let Some(b) = b {
            let bt = self.val(b.0);
            if bt.len() != out {
                return Err(shape_err(format!("linear: bias {:?} for {out} outputs", bt.shape())));
            }
            for r in 0..rows {
                y[r * out..(r + 1) * out].copy_from_slice(bt.data());
            }
        }
        let (xd, wd) = (xt.data(), wt.data());
        for r in 0..rows {
            let xr = &xd[r * inp..(r + 1) * inp];
            for o in 0..out {
                let wr = &wd[o * inp..(o + 1) * inp];
                y[r * out + o] += dot(xr, wr);
            }
        }
        let t = if xt.is_vector() { Tensor::vector(y) } else { Tensor::matrix(rows, out, y) };
        Ok(self.push(t, Op::Linear { x: x.0, w: w.0, b: b.map(|b| b.0) }))
    }

    /// Adds the vector `bias` to every row of `x`.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var, NtpError> {
        let (xt, bt) = (self.val(x.0), self.val(bias.0));
        if xt.cols() != bt.len() {
            return Err(shape_err(format!("row bias {:?} onto {:?}", bt.shape(), xt.shape())));
        }
        let c = xt.cols();
        let mut out = xt.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            *v += bt.data()[i % c];
        }
        Ok(self.push(out, Op::AddRowBias { x: x.0, bias: bias.0 }))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(), NtpError> {
        let (at, bt) = (self.val(a.0), self.val(b.0));
        if at.shape() != bt.shape() {
            return Err(shape_err(format!("{what}: {:?} vs {:?}", at.shape(), bt.shape())));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NtpError> {
        self.same_shape(a, b, "add")?;
        let mut out = self.val(a.0).clone();
        out.add_assign(self.val(b.0));
        Ok(self.push(out, Op::Add(a.0, b.0)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NtpError> {
        self.same_shape(a, b, "mul")?;
        let mut out = self.val(a.0).clone();
        for (x, y) in out.data_mut().iter_mut().zip(self.val(b.0).data()) {
            *x *= y;
        }
        Ok(self.push(out, Op::Mul(a.0, b.0)))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let out = self.map(a, |x| 1.0 - x);
        self.push(out, Op::OneMinus(a.0))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.map(a, |x| k * x);
        self.push(out, Op::Scale(a.0, k))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.map(a, |x| x.max(0.0));
        self.push(out, Op::Relu(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.map(a, sigmoid);
        self.push(out, Op::Sigmoid(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.map(a, f64::tanh);
        self.push(out, Op::Tanh(a.0))
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let mut out = self.val(a.0).clone();
        out.data_mut().iter_mut().for_each(|x| *x = f(*x));
        out
    }

    /// Concatenates vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NtpError> {
        let mut data = Vec::new();
        for p in parts {
            let t = self.val(p.0);
            if !t.is_vector() {
                return Err(shape_err(format!("concat expects vectors, got {:?}", t.shape())));
            }
            data.extend_from_slice(t.data());
        }
        Ok(self.push(Tensor::vector(data), Op::Concat(parts.iter().map(|p| p.0).collect())))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NtpError> {
        let t = self.val(x.0);
        if !t.is_vector() || start + len > t.len() {
            return Err(shape_err(format!("slice {start}+{len} of {:?}", t.shape())));
        }
        let data = t.data()[start..start + len].to_vec();
        Ok(self.push(Tensor::vector(data), Op::Slice { x: x.0, start }))
    }

    /// Row `index` of matrix `m` as a vector.
    pub fn row(&mut self, m: Var, index: usize) -> Result<Var, NtpError> {
        let t = self.val(m.0);
        if t.shape().len() != 2 || index >= t.rows() {
            return Err(shape_err(format!("row {index} of {:?}", t.shape())));
        }
        let data = t.row(index).to_vec();
        Ok(self.push(Tensor::vector(data), Op::Row { m: m.0, index }))
    }

    /// Temporal convolution with zero padding so the output keeps `N` rows.
    ///
    /// `seq` is `[N, d]`, `w` is `[m, d·width]`, `b` is `[m]`; output row `j`
    /// is `w · concat(frames j-h ..= j+h) + b` with `h = (width - 1) / 2`.
    pub fn conv1d(&mut self, seq: Var, w: Var, b: Var, width: usize) -> Result<Var, NtpError> {
        let (st, wt, bt) = (self.val(seq.0), self.val(w.0), self.val(b.0));
        if width % 2 == 0 {
            return Err(shape_err(format!("conv width {width} must be odd")));
        }
        if st.shape().len() != 2 || st.rows() == 0 {
            return Err(shape_err(format!("conv input {:?}", st.shape())));
        }
        let (n, d) = (st.rows(), st.cols());
        let m = wt.rows();
        if wt.cols() != d * width || bt.len() != m {
            return Err(shape_err(format!(
                "conv weight {:?} / bias {:?} for d={d}, width={width}",
                wt.shape(),
                bt.shape()
            )));
        }
        let half = (width / 2) as isize;
        let (sd, wd) = (st.data(), wt.data());
        let mut out = vec![0.0; n * m];
        for j in 0..n {
            let row = &mut out[j * m..(j + 1) * m];
            row.copy_from_slice(bt.data());
            for (slot, off) in (-half..=half).enumerate() {
                let src = j as isize + off;
                if src < 0 || src >= n as isize {
                    continue;
                }
                let frame = &sd[src as usize * d..(src as usize + 1) * d];
                for (o, r) in row.iter_mut().enumerate() {
                    let wr = &wd[o * d * width + slot * d..o * d * width + (slot + 1) * d];
                    *r += dot(frame, wr);
                }
            }
        }
        Ok(self.push(Tensor::matrix(n, m, out), Op::Conv1d { seq: seq.0, w: w.0, b: b.0, width }))
    }

    /// Column-wise maximum over rows (max-pooling over time).
    pub fn max_rows(&mut self, x: Var) -> Result<Var, NtpError> {
        let t = self.val(x.0);
        if t.rows() == 0 {
            return Err(shape_err("max over zero rows".into()));
        }
        let (n, c) = (t.rows(), t.cols());
        let mut arg = vec![0usize; c];
        let mut out = t.row(0).to_vec();
        for r in 1..n {
            for (k, v) in t.row(r).iter().enumerate() {
                if *v > out[k] {
                    out[k] = *v;
                    arg[k] = r;
                }
            }
        }
        Ok(self.push(Tensor::vector(out), Op::MaxRows { x: x.0, arg }))
    }

    /// Cross-entropy of `softmax(logits)` against a class index.
    pub fn softmax_ce(&mut self, logits: Var, target: usize) -> Result<Var, NtpError> {
        let n = self.val(logits.0).len();
        if target >= n {
            return Err(shape_err(format!("target {target} outside {n} classes")));
        }
        let mut dist = vec![0.0; n];
        dist[target] = 1.0;
        self.softmax_ce_soft(logits, dist)
    }

    /// Cross-entropy against an arbitrary target distribution.
    pub fn softmax_ce_soft(&mut self, logits: Var, target: Vec<f64>) -> Result<Var, NtpError> {
        let lt = self.val(logits.0);
        if !lt.is_vector() || lt.len() != target.len() {
            return Err(shape_err(format!("softmax_ce logits {:?} vs {} targets", lt.shape(), target.len())));
        }
        let probs = softmax(lt.data());
        let loss = ce(&target, lt.data());
        Ok(self.push(Tensor::scalar(loss), Op::SoftmaxCe { logits: logits.0, target, probs }))
    }

    /// Mean over rows of per-row softmax cross-entropy; `targets` has the
    /// same `[N, C]` shape as `logits` and holds one distribution per row.
    pub fn softmax_ce_rows(&mut self, logits: Var, targets: Tensor) -> Result<Var, NtpError> {
        let lt = self.val(logits.0);
        if lt.shape() != targets.shape() || lt.shape().len() != 2 {
            return Err(shape_err(format!("row ce {:?} vs {:?}", lt.shape(), targets.shape())));
        }
        let (n, c) = (lt.rows(), lt.cols());
        let mut probs = Vec::with_capacity(n * c);
        let mut total = 0.0;
        for r in 0..n {
            let p = softmax(lt.row(r));
            total += ce(targets.row(r), lt.row(r));
            probs.extend(p);
        }
        let loss = total / n as f64;
        let probs = Tensor::matrix(n, c, probs);
        Ok(self.push(Tensor::scalar(loss), Op::SoftmaxCeRows { logits: logits.0, targets, probs }))
    }

    /// Binary cross-entropy of `sigmoid(logit)` against `target` in [0, 1].
    pub fn sigmoid_bce(&mut self, logit: Var, target: f64) -> Result<Var, NtpError> {
        let lt = self.val(logit.0);
        if lt.len() != 1 {
            return Err(shape_err(format!("bce expects a scalar logit, got {:?}", lt.shape())));
        }
        let x = lt.item();
        let loss = x.max(0.0) - x * target + (-x.abs()).exp().ln_1p();
        Ok(self.push(Tensor::scalar(loss), Op::SigmoidBce { logit: logit.0, target }))
    }

    pub fn sum(&mut self, scalars: &[Var]) -> Result<Var, NtpError> {
        let mut total = 0.0;
        for s in scalars {
            let t = self.val(s.0);
            if t.len() != 1 {
                return Err(shape_err(format!("sum expects scalars, got {:?}", t.shape())));
            }
            total += t.item();
        }
        Ok(self.push(Tensor::scalar(total), Op::Sum(scalars.iter().map(|s| s.0).collect())))
    }

    /// Same values under a new shape with equal element count.
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, NtpError> {
        let t = Tensor::new(shape.to_vec(), self.val(x.0).data().to_vec())?;
        Ok(self.push(t, Op::Reshape(x.0)))
    }

    /// Sum of every element of `x` as a scalar.
    pub fn total(&mut self, x: Var) -> Var {
        let t = self.val(x.0).data().iter().sum();
        self.push(Tensor::scalar(t), Op::Total(x.0))
    }

    /// Reverse pass from the scalar `root`; returns parameter gradients.
    pub fn backward(&self, root: Var) -> Result<Gradients, NtpError> {
        let rv = self.val(root.0);
        if rv.len() != 1 {
            return Err(shape_err(format!("backward root must be scalar, got {:?}", rv.shape())));
        }
        if !rv.all_finite() {
            return Err(NtpError::Divergence("non-finite loss".into()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(1.0));
        let mut out = Gradients::default();
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].req {
                continue;
            }
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(id) => out.add(*id, g),
                Op::Linear { x, w, b } => {
                    let (xt, wt) = (self.val(*x), self.val(*w));
                    let (rows, inp, outn) = (xt.rows(), xt.cols(), wt.rows());
                    let (gd, xd, wd) = (g.data(), xt.data(), wt.data());
                    let (need_x, need_w) = (self.nodes[*x].req, self.nodes[*w].req);
                    let mut dx = vec![0.0; if need_x { rows * inp } else { 0 }];
                    let mut dw = vec![0.0; if need_w { outn * inp } else { 0 }];
                    for r in 0..rows {
                        let xr = &xd[r * inp..(r + 1) * inp];
                        for o in 0..outn {
                            let go = gd[r * outn + o];
                            if go == 0.0 {
                                continue;
                            }
                            if need_x {
                                axpy(go, &wd[o * inp..(o + 1) * inp], &mut dx[r * inp..(r + 1) * inp]);
                            }
                            if need_w {
                                axpy(go, xr, &mut dw[o * inp..(o + 1) * inp]);
                            }
                        }
                    }
                    if need_x {
                        acc(&mut grads, *x, Tensor::new(xt.shape().to_vec(), dx)?);
                    }
                    if need_w {
                        acc(&mut grads, *w, Tensor::matrix(outn, inp, dw));
                    }
                    if let Some(b) = b {
                        let mut db = vec![0.0; outn];
                        for r in 0..rows {
                            axpy(1.0, &gd[r * outn..(r + 1) * outn], &mut db);
                        }
                        acc(&mut grads, *b, Tensor::vector(db));
                    }
                }
                Op::AddRowBias { x, bias } => {
                    let c = g.cols();
                    let mut db = vec![0.0; c];
                    for (k, v) in g.data().iter().enumerate() {
                        db[k % c] += v;
                    }
                    acc(&mut grads, *bias, Tensor::vector(db));
                    acc(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let da = zip_map(&g, self.val(*b), |gv, bv| gv * bv);
                    let db = zip_map(&g, self.val(*a), |gv, av| gv * av);
                    acc(&mut grads, *a, da);
                    acc(&mut grads, *b, db);
                }
                Op::OneMinus(a) => acc(&mut grads, *a, zip_map(&g, &g, |gv, _| -gv)),
                Op::Scale(a, k) => acc(&mut grads, *a, zip_map(&g, &g, |gv, _| k * gv)),
                Op::Relu(a) => acc(&mut grads, *a, zip_map(&g, self.val(*a), |gv, x| if x > 0.0 { gv } else { 0.0 })),
                Op::Sigmoid(a) => {
                    let y = self.val(i);
                    acc(&mut grads, *a, zip_map(&g, y, |gv, s| gv * s * (1.0 - s)));
                }
                Op::Tanh(a) => {
                    let y = self.val(i);
                    acc(&mut grads, *a, zip_map(&g, y, |gv, t| gv * (1.0 - t * t)));
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.val(*p).len();
                        acc(&mut grads, *p, Tensor::vector(g.data()[off..off + n].to_vec()));
                        off += n;
                    }
                }
                Op::Slice { x, start } => {
                    let xt = self.val(*x);
                    let mut d = vec![0.0; xt.len()];
                    d[*start..*start + g.len()].copy_from_slice(g.data());
                    acc(&mut grads, *x, Tensor::vector(d));
                }
                Op::Row { m, index } => {
                    let mt = self.val(*m);
                    let c = mt.cols();
                    let mut d = vec![0.0; mt.len()];
                    d[index * c..(index + 1) * c].copy_from_slice(g.data());
                    acc(&mut grads, *m, Tensor::new(mt.shape().to_vec(), d)?);
                }
                Op::Conv1d { seq, w, b, width } => {
                    let (st, wt) = (self.val(*seq), self.val(*w));
                    let (n, d, m) = (st.rows(), st.cols(), wt.rows());
                    let half = (*width / 2) as isize;
                    let (sd, wd, gd) = (st.data(), wt.data(), g.data());
                    let need_s = self.nodes[*seq].req;
                    let mut ds = vec![0.0; if need_s { n * d } else { 0 }];
                    let mut dw = vec![0.0; m * d * width];
                    let mut db = vec![0.0; m];
                    for j in 0..n {
                        let gj = &gd[j * m..(j + 1) * m];
                        axpy(1.0, gj, &mut db);
                        for (slot, off) in (-half..=half).enumerate() {
                            let src = j as isize + off;
                            if src < 0 || src >= n as isize {
                                continue;
                            }
                            let src = src as usize;
                            let frame = &sd[src * d..(src + 1) * d];
                            for (o, &go) in gj.iter().enumerate() {
                                if go == 0.0 {
                                    continue;
                                }
                                let base = o * d * width + slot * d;
                                if need_s {
                                    axpy(go, &wd[base..base + d], &mut ds[src * d..(src + 1) * d]);
                                }
                                axpy(go, frame, &mut dw[base..base + d]);
                            }
                        }
                    }
                    if need_s {
                        acc(&mut grads, *seq, Tensor::matrix(n, d, ds));
                    }
                    acc(&mut grads, *w, Tensor::matrix(m, d * width, dw));
                    acc(&mut grads, *b, Tensor::vector(db));
                }
                Op::MaxRows { x, arg } => {
                    let xt = self.val(*x);
                    let c = xt.cols();
                    let mut d = vec![0.0; xt.len()];
                    for (k, &r) in arg.iter().enumerate() {
                        d[r * c + k] += g.data()[k];
                    }
                    acc(&mut grads, *x, Tensor::new(xt.shape().to_vec(), d)?);
                }
                Op::Reshape(x) => {
                    let shape = self.val(*x).shape().to_vec();
                    acc(&mut grads, *x, Tensor::new(shape, g.into_data())?);
                }
                Op::Total(x) => {
                    let xt = self.val(*x);
                    let d = vec![g.item(); xt.len()];
                    acc(&mut grads, *x, Tensor::new(xt.shape().to_vec(), d)?);
                }
                Op::SoftmaxCe { logits, target, probs } => {
                    let up = g.item();
                    let d: Vec<f64> = probs.iter().zip(target).map(|(p, t)| up * (p - t)).collect();
                    acc(&mut grads, *logits, Tensor::vector(d));
                }
                Op::SoftmaxCeRows { logits, targets, probs } => {
                    let n = probs.rows() as f64;
                    let up = g.item() / n;
                    let d: Vec<f64> = probs.data().iter().zip(targets.data()).map(|(p, t)| up * (p - t)).collect();
                    acc(&mut grads, *logits, Tensor::matrix(probs.rows(), probs.cols(), d));
                }
                Op::SigmoidBce { logit, target } => {
                    let x = self.val(*logit).item();
                    let d = g.item() * (sigmoid(x) - target);
                    let shape = self.val(*logit).shape().to_vec();
                    acc(&mut grads, *logit, Tensor::new(shape, vec![d])?);
                }
                Op::Sum(parts) => {
                    for p in parts {
                        let shape = self.val(*p).shape().to_vec();
                        acc(&mut grads, *p, Tensor::new(shape, vec![g.item()])?);
                    }
                }
            }
        }
        Ok(out)
    }
}

fn ce(target: &[f64], logits: &[f64]) -> f64 {
    // log p_i = l_i - logsumexp(l), evaluated stably.
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    target
        .iter()
        .zip(logits)
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, l)| -t * (l - lse))
        .sum()
}

fn acc(grads: &mut [Option<Tensor>], i: usize, g: Tensor) {
    match &mut grads[i] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = c * 4;
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for k in chunks * 4..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
