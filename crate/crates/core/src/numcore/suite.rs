//! Finite-difference checks over every differentiable graph operation.
//!
//! Each case builds a small random graph, scalarizes its output with a fixed
//! random projection and compares analytic gradients against central
//! differences on every coordinate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dense, grad_check, gru_cell, GradCheckReport, Graph, GruParams, ParamStore, Tensor, Var};
use crate::error::NtpError;

const H: f64 = 1e-5;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape matches data")
}

fn project(g: &mut Graph, y: Var, proj: &Tensor) -> Result<Var, NtpError> {
    let p = g.input(proj.clone());
    let prod = g.mul(y, p)?;
    Ok(g.total(prod))
}

fn case_dense(rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NtpError> {
    let mut s = ParamStore::new();
    let w = s.insert_weight("w", 7, 5, rng);
    let b = s.insert("b", rand_tensor(rng, &[7]));
    let x = rand_tensor(rng, &[3, 5]);
    let proj = rand_tensor(rng, &[3, 7]);
    let f = |st: &ParamStore| {
        let mut g = Graph::new(st);
        let xv = g.input(x.clone());
        let y = dense(&mut g, xv, w, b, true)?;
        let l = project(&mut g, y, &proj)?;
        Ok((g.value(l).item(), g.backward(l)?))
    };
    grad_check(&s, f, H, None, rng)
}

fn case_elementwise(rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NtpError> {
    let mut s = ParamStore::new();
    let a = s.insert("a", rand_tensor(rng, &[6]));
    let b = s.insert("b", rand_tensor(rng, &[6]));
    let m = s.insert("m", rand_tensor(rng, &[3, 4]));
    let bias = s.insert("bias", rand_tensor(rng, &[4]));
    let proj = rand_tensor(rng, &[13]);
    let f = |st: &ParamStore| {
        let mut g = Graph::new(st);
        let (av, bv, mv, biasv) = (g.param(a), g.param(b), g.param(m), g.param(bias));
        let t = g.tanh(av);
        let sg = g.sigmoid(bv);
        let om = g.one_minus(sg);
        let prod = g.mul(t, om)?;
        let sc = g.scale(prod, -1.7);
        let sum = g.add(sc, av)?;
        let head = g.slice(sum, 1, 4)?;
        let mb = g.add_row_bias(mv, biasv)?;
        let r2 = g.row(mb, 2)?;
        let mixed = g.add(head, r2)?;
        let tail = g.slice(sum, 0, 5)?;
        let cat = g.concat(&[mixed, tail, r2])?;
        let l = project(&mut g, cat, &proj)?;
        Ok((g.value(l).item(), g.backward(l)?))
    };
    grad_check(&s, f, H, None, rng)
}

fn case_conv1d(rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NtpError> {
    let mut s = ParamStore::new();
    let w = s.insert_weight("w", 6, 12, rng);
    let b = s.insert("b", rand_tensor(rng, &[6]));
    let seq = s.insert("seq", rand_tensor(rng, &[9, 4]));
    let proj = rand_tensor(rng, &[9, 6]);
    let f = |st: &ParamStore| {
        let mut g = Graph::new(st);
        let (sv, wv, bv) = (g.param(seq), g.param(w), g.param(b));
        let y = g.conv1d(sv, wv, bv, 3)?;
        let l = project(&mut g, y, &proj)?;
        Ok((g.value(l).item(), g.backward(l)?))
    };
    grad_check(&s, f, H, None, rng)
}

fn case_max_rows_reshape(rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NtpError> {
    let mut s = ParamStore::new();
    let x = s.insert("x", rand_tensor(rng, &[5, 4]));
    let proj = rand_tensor(rng, &[2, 2]);
    let f = |st: &ParamStore| {
        let mut g = Graph::new(st);
        let xv = g.param(x);
        let m = g.max_rows(xv)?;
        let r = g.reshape(m, &[2, 2])?;
        let l = project(&mut g, r, &proj)?;
        Ok((g.value(l).item(), g.backward(l)?))
    };
    grad_check(&s, f, H, None, rng)
}

fn case_losses(rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NtpError> {
    let mut s = ParamStore::new();
    let logits = s.insert("logits", rand_tensor(rng, &[6]));
    let soft = s.insert("soft", rand_tensor(rng, &[5]));
    let rows = s.insert("rows", rand_tensor(rng, &[5, 4]));
    let eop = s.insert("eop", rand_tensor(rng, &[1]));
    let mut targets = vec![0.0; 20];
    for r in 0..5 {
        targets[r * 4 + (r % 4)] = 1.0;
    }
    targets[0] = 0.5;
    targets[1] = 0.5;
    let targets = Tensor::matrix(5, 4, targets);
    let f = |st: &ParamStore| {
        let mut g = Graph::new(st);
        let lv = g.param(logits);
        let a = g.softmax_ce(lv, 4)?;
        let sv = g.param(soft);
        let b = g.softmax_ce_soft(sv, vec![0.1, 0.2, 0.0, 0.3, 0.4])?;
        let rv = g.param(rows);
        let c = g.softmax_ce_rows(rv, targets.clone())?;
        let ev = g.param(eop);
        let d = g.sigmoid_bce(ev, 1.0)?;
        let l = g.sum(&[a, b, c, d])?;
        Ok((g.value(l).item(), g.backward(l)?))
    };
    grad_check(&s, f, H, None, rng)
}

fn case_gru(rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NtpError> {
    let mut s = ParamStore::new();
    let p = GruParams::register(&mut s, "gru", 6, 8, rng);
    for id in [p.b_update, p.b_reset, p.b_cand, p.c_cand] {
        *s.value_mut(id) = rand_tensor(rng, &[8]);
    }
    let xs: Vec<Tensor> = (0..4).map(|_| rand_tensor(rng, &[6])).collect();
    let proj = rand_tensor(rng, &[8]);
    let f = |st: &ParamStore| {
        let mut g = Graph::new(st);
        let mut h = g.input(Tensor::zeros(&[8]));
        for x in &xs {
            let xv = g.input(x.clone());
            h = gru_cell(&mut g, xv, h, &p)?;
        }
        let l = project(&mut g, h, &proj)?;
        Ok((g.value(l).item(), g.backward(l)?))
    };
    grad_check(&s, f, H, None, rng)
}

type Case = fn(&mut ChaCha8Rng) -> Result<GradCheckReport, NtpError>;

const CASES: [(&str, Case); 6] = [
    ("dense_relu", case_dense),
    ("elementwise_and_indexing", case_elementwise),
    ("conv1d", case_conv1d),
    ("max_rows_reshape", case_max_rows_reshape),
    ("losses", case_losses),
    ("gru_bptt", case_gru),
];

/// Runs every operation case with its own seeded rng.
pub fn op_suite(seed: u64) -> Result<Vec<(String, GradCheckReport)>, NtpError> {
    CASES
        .iter()
        .enumerate()
        .map(|(i, (name, case))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            case(&mut rng).map(|r| (name.to_string(), r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_op_passes() {
        for (name, r) in op_suite(0).unwrap() {
            assert!(r.coordinates > 0, "{name}");
            assert!(r.passes(1e-6), "{name}: {r:?}");
        }
    }
}
