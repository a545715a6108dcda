//! Shared helpers for the integration tests.
#![allow(dead_code)]

use daa_core::nn::{Graph, ParamStore, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform values in `[-1, 1]` kept at least `gap` away from zero.
pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], gap: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let v: f64 = rng.random_range(gap..1.0);
        if rng.random::<bool>() {
            v
        } else {
            -v
        }
    })
}

pub fn positive_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Compares reverse-mode gradients of `f` with central differences for
/// every input. Returns the worst relative error.
pub fn grad_check<F>(inputs: &[Tensor<f64>], f: F) -> f64
where
    F: Fn(&mut Graph<'_, f64>, &[Var]) -> Var,
{
    let params = ParamStore::<f64>::new();
    let eval = |xs: &[Tensor<f64>]| -> f64 {
        let mut g = Graph::inference(&params);
        let vars: Vec<Var> = xs.iter().map(|t| g.input(t.clone())).collect();
        let out = f(&mut g, &vars);
        g.value(out).item()
    };
    let mut g = Graph::new(&params);
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&mut g, &vars);
    let grads = g.backward(out).expect("scalar output");

    let mut worst: f64 = 0.0;
    for (k, v) in vars.iter().enumerate() {
        let analytic = grads
            .get(*v)
            .map(|s| s.to_vec())
            .unwrap_or_else(|| vec![0.0; inputs[k].len()]);
        let mut numeric = Vec::with_capacity(inputs[k].len());
        for i in 0..inputs[k].len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= FD_STEP;
            numeric.push((eval(&plus) - eval(&minus)) / (2.0 * FD_STEP));
        }
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    worst
}

/// Weighted sum `sum_i w_i x_i` with fixed pseudo-random weights, so the
/// check sees a generic upstream gradient.
pub fn weighted_sum(g: &mut Graph<'_, f64>, x: Var, seed: u64) -> Var {
    let mut r = rng(seed);
    let shape = g.shape(x).to_vec();
    let w = g.input(Tensor::from_fn(&shape, |_| r.random_range(-1.0..1.0)));
    let p = g.mul(x, w).unwrap();
    g.sum(p).unwrap()
}
