//! Analytic gradients against central differences of an independent loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xfer_surface::toy::{backward, Objective, Targets};
use xfer_surface::{ParameterSet64, Tensor64};

const D: usize = 4;
const H: usize = 3;
const K: usize = 2;
const N: usize = 5;
const STEP: f64 = 1e-6;
const MAX_REL_ERR: f64 = 1e-4;

fn random_net(rng: &mut ChaCha8Rng, out: usize) -> ParameterSet64 {
    let mut t = |shape: Vec<usize>| {
        let n = shape.iter().product();
        Tensor64::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    };
    ParameterSet64::from_tensors([
        ("encoder.w1", t(vec![H, D])),
        ("encoder.b1", t(vec![H])),
        ("encoder.w2", t(vec![H, H])),
        ("encoder.b2", t(vec![H])),
        ("head.w", t(vec![out, H])),
        ("head.b", t(vec![out])),
    ])
    .unwrap()
}

fn dense(w: &[f64], b: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
    let cols = x.len();
    (0..rows)
        .map(|r| b[r] + (0..cols).map(|c| w[r * cols + c] * x[c]).sum::<f64>())
        .collect()
}

/// Plain per-row forward pass written independently of the crate.
fn oracle_loss(p: &ParameterSet64, x: &[f64], labels: Option<&[usize]>, out: usize) -> f64 {
    let g = |n: &str| p.get(n).unwrap().data();
    let mut total = 0.0;
    for i in 0..N {
        let xi = &x[i * D..(i + 1) * D];
        let a1: Vec<f64> = dense(g("encoder.w1"), g("encoder.b1"), xi, H)
            .iter()
            .map(|v| v.tanh())
            .collect();
        let a2: Vec<f64> = dense(g("encoder.w2"), g("encoder.b2"), &a1, H)
            .iter()
            .map(|v| v.tanh())
            .collect();
        let o = dense(g("head.w"), g("head.b"), &a2, out);
        match labels {
            Some(y) => {
                let lse = o.iter().map(|v| v.exp()).sum::<f64>().ln();
                total += lse - o[y[i]];
            }
            None => total += o.iter().zip(xi).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / D as f64,
        }
    }
    total / N as f64
}

fn max_rel_error(objective: Objective, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = match objective {
        Objective::CrossEntropy => K,
        Objective::MseReconstruction => D,
    };
    let net = random_net(&mut rng, out);
    let x: Vec<f64> = (0..N * D).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<usize> = (0..N).map(|_| rng.random_range(0..K)).collect();
    let (targets, labels) = match objective {
        Objective::CrossEntropy => (Targets::Labels(&y), Some(y.as_slice())),
        Objective::MseReconstruction => (Targets::Values(&x), None),
    };
    let (loss, grads) = backward(&net, &x, N, targets, objective).unwrap();
    let reference = oracle_loss(&net, &x, labels, out);
    assert!((loss - reference).abs() <= 1e-12 * reference.abs().max(1.0));

    let mut worst: f64 = 0.0;
    for (name, g) in grads.iter() {
        for (k, &analytic) in g.data().iter().enumerate() {
            let mut plus = net.clone();
            plus.get_mut(name).unwrap().data_mut()[k] += STEP;
            let mut minus = net.clone();
            minus.get_mut(name).unwrap().data_mut()[k] -= STEP;
            let numeric = (oracle_loss(&plus, &x, labels, out)
                - oracle_loss(&minus, &x, labels, out))
                / (2.0 * STEP);
            let denom = analytic.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}

#[test]
fn cross_entropy_gradients_match_finite_differences() {
    for seed in 0..20 {
        let err = max_rel_error(Objective::CrossEntropy, seed);
        assert!(err < MAX_REL_ERR, "seed {seed}: {err}");
    }
}

#[test]
fn reconstruction_gradients_match_finite_differences() {
    for seed in 100..120 {
        let err = max_rel_error(Objective::MseReconstruction, seed);
        assert!(err < MAX_REL_ERR, "seed {seed}: {err}");
    }
}
