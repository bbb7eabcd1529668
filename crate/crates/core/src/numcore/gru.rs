use rand::Rng;

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use crate::error::NtpError;

/// Parameter handles for one gated recurrent unit.
///
/// Update rule: `u = σ(W_u x + U_u h + b_u)`, `g = σ(W_g x + U_g h + b_g)`,
/// `n = tanh(W_n x + b_n + g ⊙ (U_n h + c_n))`, `h' = u ⊙ n + (1 - u) ⊙ h`.
/// A closed update gate (`u → 0`) copies the previous state through.
#[derive(Clone, Copy, Debug)]
pub struct GruParams {
    pub w_update: ParamId,
    pub u_update: ParamId,
    pub b_update: ParamId,
    pub w_reset: ParamId,
    pub u_reset: ParamId,
    pub b_reset: ParamId,
    pub w_cand: ParamId,
    pub u_cand: ParamId,
    pub b_cand: ParamId,
    pub c_cand: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruParams {
    pub fn register<R: Rng>(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut w = |s: &str, i: usize| store.insert_weight(&format!("{prefix}.{s}"), hidden, i, rng);
        let w_update = w("w_update", input);
        let u_update = w("u_update", hidden);
        let w_reset = w("w_reset", input);
        let u_reset = w("u_reset", hidden);
        let w_cand = w("w_cand", input);
        let u_cand = w("u_cand", hidden);
        GruParams {
            w_update,
            u_update,
            b_update: store.insert_bias(&format!("{prefix}.b_update"), hidden),
            w_reset,
            u_reset,
            b_reset: store.insert_bias(&format!("{prefix}.b_reset"), hidden),
            w_cand,
            u_cand,
            b_cand: store.insert_bias(&format!("{prefix}.b_cand"), hidden),
            c_cand: store.insert_bias(&format!("{prefix}.c_cand"), hidden),
            input,
            hidden,
        }
    }
}

pub fn gru_cell(g: &mut Graph, x: Var, h_prev: Var, p: &GruParams) -> Result<Var, NtpError> {
    let lin = |g: &mut Graph, v: Var, w: ParamId, b: Option<ParamId>| -> Result<Var, NtpError> {
        let wv = g.param(w);
        let bv = b.map(|b| g.param(b));
        g.linear(v, wv, bv)
    };
    let xu = lin(g, x, p.w_update, Some(p.b_update))?;
    let hu = lin(g, h_prev, p.u_update, None)?;
    let su = g.add(xu, hu)?;
    let update = g.sigmoid(su);

    let xr = lin(g, x, p.w_reset, Some(p.b_reset))?;
    let hr = lin(g, h_prev, p.u_reset, None)?;
    let sr = g.add(xr, hr)?;
    let reset = g.sigmoid(sr);

    let xn = lin(g, x, p.w_cand, Some(p.b_cand))?;
    let hn = lin(g, h_prev, p.u_cand, Some(p.c_cand))?;
    let gated = g.mul(reset, hn)?;
    let sn = g.add(xn, gated)?;
    let cand = g.tanh(sn);

    let keep = g.one_minus(update);
    let a = g.mul(update, cand)?;
    let b = g.mul(keep, h_prev)?;
    g.add(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::gradcheck::grad_check;
    use crate::numcore::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Tensor {
        Tensor::vector((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn zero_everything_gives_zero_state() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GruParams::register(&mut store, "gru", 3, 4, &mut rng);
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).fill(0.0);
        }
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::zeros(&[3]));
        let h = g.input(Tensor::zeros(&[4]));
        let out = gru_cell(&mut g, x, h, &p).unwrap();
        assert!(g.value(out).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn closed_update_gate_copies_state() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = GruParams::register(&mut store, "gru", 3, 4, &mut rng);
        store.value_mut(p.b_update).fill(-50.0);
        let x0 = random_vec(&mut rng, 3);
        let h0 = random_vec(&mut rng, 4);
        let mut g = Graph::new(&store);
        let x = g.input(x0);
        let h = g.input(h0.clone());
        let out = gru_cell(&mut g, x, h, &p).unwrap();
        for (a, b) in g.value(out).data().iter().zip(h0.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = GruParams::register(&mut store, "gru", 8, 16, &mut rng);
        for id in [p.b_update, p.b_reset, p.b_cand, p.c_cand] {
            let v = random_vec(&mut rng, 16);
            *store.value_mut(id) = v;
        }
        let xs: Vec<Tensor> = (0..5).map(|_| random_vec(&mut rng, 8)).collect();
        let target = random_vec(&mut rng, 16);
        let loss = |s: &ParamStore| {
            let mut g = Graph::new(s);
            let mut h = g.input(Tensor::zeros(&[16]));
            for x in &xs {
                let xv = g.input(x.clone());
                h = gru_cell(&mut g, xv, h, &p)?;
            }
            let t = g.input(target.clone());
            let prod = g.mul(h, t)?;
            let parts: Vec<Var> = (0..16).map(|i| g.slice(prod, i, 1)).collect::<Result<_, _>>()?;
            let l = g.sum(&parts)?;
            Ok((g.value(l).item(), g.backward(l)?))
        };
        let report = grad_check(&store, loss, 1e-5, None, &mut rng).unwrap();
        assert!(report.max_rel_err < 1e-5, "{report:?}");
    }
}
