//! Minimal reverse-mode differentiable numeric core in double precision.

pub mod gradcheck;
pub mod graph;
pub mod gru;
pub mod params;
pub mod suite;
pub mod tensor;

pub use gradcheck::{grad_check, rel_err, GradCheckReport};
pub use graph::{Graph, Var};
pub use gru::{gru_cell, GruParams};
pub use suite::op_suite;
pub use params::{AdamConfig, Gradients, ParamId, ParamStore};
pub use tensor::{argmax, sigmoid, softmax, Tensor};

use crate::error::NtpError;

/// Dense layer helper: `x · wᵀ + b`, optionally followed by relu.
pub fn dense(g: &mut Graph, x: Var, w: ParamId, b: ParamId, relu: bool) -> Result<Var, NtpError> {
    let (wv, bv) = (g.param(w), g.param(b));
    let y = g.linear(x, wv, Some(bv))?;
    Ok(if relu { g.relu(y) } else { y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Scalarizes an output by a fixed random projection so every output
    /// coordinate contributes to the checked gradient.
    fn project(g: &mut Graph, y: Var, proj: &Tensor) -> Result<Var, NtpError> {
        let p = g.input(proj.clone());
        let prod = g.mul(y, p)?;
        Ok(g.total(prod))
    }

    #[test]
    fn dense_identity_passes_input_through() {
        let mut s = ParamStore::new();
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let w = s.insert("w", Tensor::matrix(3, 3, eye));
        let b = s.insert_bias("b", 3);
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::vector(vec![0.5, -1.0, 2.0]));
        let y = dense(&mut g, x, w, b, false).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let x = g.input(Tensor::vector(vec![-1.0, 2.0]));
        let y = g.relu(x);
        assert_eq!(g.value(y).data(), &[0.0, 2.0]);
    }

    #[test]
    fn dense_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = ParamStore::new();
        let w = s.insert_weight("w", 7, 5, &mut rng);
        let b = s.insert("b", rand_tensor(&mut rng, &[7]));
        let x = rand_tensor(&mut rng, &[3, 5]);
        let proj = rand_tensor(&mut rng, &[3, 7]);
        let f = |st: &ParamStore| {
            let mut g = Graph::new(st);
            let xv = g.input(x.clone());
            let y = dense(&mut g, xv, w, b, true)?;
            let l = project(&mut g, y, &proj)?;
            Ok((g.value(l).item(), g.backward(l)?))
        };
        let r = grad_check(&s, f, 1e-5, None, &mut rng).unwrap();
        assert!(r.max_rel_err < 1e-6, "{r:?}");
    }

    #[test]
    fn conv_with_unit_width_is_framewise_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = ParamStore::new();
        let w = s.insert_weight("w", 2, 3, &mut rng);
        let b = s.insert_bias("b", 2);
        let seq = rand_tensor(&mut rng, &[4, 3]);
        let mut g = Graph::new(&s);
        let sv = g.input(seq.clone());
        let (wv, bv) = (g.param(w), g.param(b));
        let conv = g.conv1d(sv, wv, bv, 1).unwrap();
        let lin = g.linear(sv, wv, Some(bv)).unwrap();
        assert_eq!(g.value(conv).data(), g.value(lin).data());
    }

    #[test]
    fn conv_maps_constant_sequence_to_constant_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = ParamStore::new();
        let w = s.insert_weight("w", 3, 6, &mut rng);
        let b = s.insert("b", rand_tensor(&mut rng, &[3]));
        let frame = [0.3, -0.7];
        let seq = Tensor::matrix(6, 2, frame.iter().cycle().take(12).cloned().collect());
        let mut g = Graph::new(&s);
        let sv = g.input(seq);
        let (wv, bv) = (g.param(w), g.param(b));
        let y = g.conv1d(sv, wv, bv, 3).unwrap();
        let out = g.value(y);
        // Zero padding only touches the first and last rows.
        for r in 2..5 {
            assert_eq!(out.row(r), out.row(1));
        }
    }

    #[test]
    fn conv_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = ParamStore::new();
        let w = s.insert_weight("w", 6, 12, &mut rng);
        let b = s.insert("b", rand_tensor(&mut rng, &[6]));
        let seq = s.insert("seq", rand_tensor(&mut rng, &[9, 4]));
        let proj = rand_tensor(&mut rng, &[9, 6]);
        let f = |st: &ParamStore| {
            let mut g = Graph::new(st);
            let (sv, wv, bv) = (g.param(seq), g.param(w), g.param(b));
            let y = g.conv1d(sv, wv, bv, 3)?;
            let l = project(&mut g, y, &proj)?;
            Ok((g.value(l).item(), g.backward(l)?))
        };
        let r = grad_check(&s, f, 1e-5, None, &mut rng).unwrap();
        assert!(r.max_rel_err < 1e-6, "{r:?}");
    }

    #[test]
    fn max_rows_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut s = ParamStore::new();
        let x = s.insert("x", rand_tensor(&mut rng, &[5, 4]));
        let proj = rand_tensor(&mut rng, &[4]);
        let f = |st: &ParamStore| {
            let mut g = Graph::new(st);
            let xv = g.param(x);
            let m = g.max_rows(xv)?;
            let l = project(&mut g, m, &proj)?;
            Ok((g.value(l).item(), g.backward(l)?))
        };
        let r = grad_check(&s, f, 1e-5, None, &mut rng).unwrap();
        assert!(r.max_rel_err < 1e-6, "{r:?}");
    }

    #[test]
    fn uniform_logits_cost_ln4() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let l = g.input(Tensor::vector(vec![0.7; 4]));
        let ce = g.softmax_ce(l, 2).unwrap();
        assert!((g.value(ce).item() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bce_at_zero_logit_is_ln2() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let l = g.input(Tensor::vector(vec![0.0]));
        let bce = g.sigmoid_bce(l, 1.0).unwrap();
        assert!((g.value(bce).item() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn softmax_ce_gradient_is_softmax_minus_onehot() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = ParamStore::new();
        let logits = s.insert("l", rand_tensor(&mut rng, &[6]));
        let target = 4;
        let f = |st: &ParamStore| {
            let mut g = Graph::new(st);
            let lv = g.param(logits);
            let l = g.softmax_ce(lv, target)?;
            Ok((g.value(l).item(), g.backward(l)?))
        };
        let (_, grads) = f(&s).unwrap();
        let p = softmax(s.value(logits).data());
        for (k, gk) in grads.get(logits).unwrap().data().iter().enumerate() {
            let expect = p[k] - if k == target { 1.0 } else { 0.0 };
            assert!((gk - expect).abs() < 1e-15);
        }
        let r = grad_check(&s, f, 1e-5, None, &mut rng).unwrap();
        assert!(r.max_rel_err < 1e-8, "{r:?}");
    }

    #[test]
    fn row_ce_and_bce_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut s = ParamStore::new();
        let logits = s.insert("rows", rand_tensor(&mut rng, &[5, 4]));
        let eop = s.insert("eop", rand_tensor(&mut rng, &[1]));
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
            let a = g.softmax_ce_rows(lv, targets.clone())?;
            let ev = g.param(eop);
            let b = g.sigmoid_bce(ev, 1.0)?;
            let l = g.sum(&[a, b])?;
            Ok((g.value(l).item(), g.backward(l)?))
        };
        let r = grad_check(&s, f, 1e-5, None, &mut rng).unwrap();
        assert!(r.max_rel_err < 1e-8, "{r:?}");
    }

    #[test]
    fn elementwise_ops_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = ParamStore::new();
        let a = s.insert("a", rand_tensor(&mut rng, &[6]));
        let b = s.insert("b", rand_tensor(&mut rng, &[6]));
        let m = s.insert("m", rand_tensor(&mut rng, &[3, 4]));
        let bias = s.insert("bias", rand_tensor(&mut rng, &[4]));
        let proj = rand_tensor(&mut rng, &[13]);
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
        let r = grad_check(&s, f, 1e-5, None, &mut rng).unwrap();
        assert!(r.max_rel_err < 1e-6, "{r:?}");
    }
}
