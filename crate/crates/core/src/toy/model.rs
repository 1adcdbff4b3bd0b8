//! Two-layer tanh encoder with a linear head.
//!
//! ```text
//! a1 = tanh(W1 x + b1)      encoder.w1 [h, D], encoder.b1 [h]
//! a2 = tanh(W2 a1 + b2)     encoder.w2 [h, h], encoder.b2 [h]
//! o  = Wh a2 + bh           head.w [out, h],   head.b [out]
//! ```
//!
//! For reconstruction the head is a decoder with `out = D` and `o` is the
//! reconstruction; for classification `out = K` and `o` goes through softmax.

use std::str::FromStr;

use rand::Rng;

use super::config::ToyTaskConfig;
use super::rng::Stream;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{meta_keys, ParameterSet, Tensor};

pub(crate) const W1: &str = "encoder.w1";
pub(crate) const B1: &str = "encoder.b1";
pub(crate) const W2: &str = "encoder.w2";
pub(crate) const B2: &str = "encoder.b2";
pub(crate) const WH: &str = "head.w";
pub(crate) const BH: &str = "head.b";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    MseReconstruction,
    CrossEntropy,
}

impl FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse_reconstruction" => Ok(Objective::MseReconstruction),
            "cross_entropy" => Ok(Objective::CrossEntropy),
            other => Err(Error::invalid(format!("unknown objective `{other}`"))),
        }
    }
}

/// What the loss compares the head output against.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a, T> {
    /// `n x out` regression targets (the inputs themselves, for reconstruction).
    Values(&'a [T]),
    Labels(&'a [usize]),
}

fn glorot<T: Scalar>(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::of(rng.random_range(-limit..limit)))
        .collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches data")
}

fn zeros<T: Scalar>(n: usize) -> Tensor<T> {
    Tensor::zeros(vec![n]).expect("positive length")
}

/// Encoder plus decoder head, Glorot-uniform weights and zero biases.
pub fn init_autoencoder<T: Scalar>(cfg: &ToyTaskConfig) -> ParameterSet<T> {
    let (d, h) = (cfg.obs_dim, cfg.hidden_dim);
    let mut rng = Stream::Init.rng(cfg.seed);
    let w1 = glorot(&mut rng, h, d);
    let w2 = glorot(&mut rng, h, h);
    let wh = glorot(&mut rng, d, h);
    ParameterSet::from_tensors([
        (W1, w1),
        (B1, zeros(h)),
        (W2, w2),
        (B2, zeros(h)),
        (WH, wh),
        (BH, zeros(d)),
    ])
    .expect("distinct names")
    .with_meta(meta_keys::ARCH, cfg.arch_tag())
    .with_meta(meta_keys::SEED, cfg.seed.to_string())
}

/// Fresh `K x h` classifier head tensors.
pub fn init_classifier_head<T: Scalar>(cfg: &ToyTaskConfig) -> [(&'static str, Tensor<T>); 2] {
    let mut rng = Stream::HeadInit.rng(cfg.seed);
    [
        (WH, glorot(&mut rng, cfg.classes, cfg.hidden_dim)),
        (BH, zeros(cfg.classes)),
    ]
}

struct Layers<'a, T> {
    w1: &'a Tensor<T>,
    b1: &'a [T],
    w2: &'a Tensor<T>,
    b2: &'a [T],
    wh: &'a Tensor<T>,
    bh: &'a [T],
    input: usize,
    hidden: usize,
    out: usize,
}

impl<'a, T: Scalar> Layers<'a, T> {
    fn bind(w: &'a ParameterSet<T>) -> Result<Self> {
        let (w1, b1, w2, b2, wh, bh) = (
            w.require(W1)?,
            w.require(B1)?,
            w.require(W2)?,
            w.require(B2)?,
            w.require(WH)?,
            w.require(BH)?,
        );
        let dims = |t: &Tensor<T>| -> Result<(usize, usize)> {
            match t.shape() {
                [r, c] => Ok((*r, *c)),
                s => Err(Error::invalid(format!(
                    "expected a matrix, got shape {s:?}"
                ))),
            }
        };
        let (hidden, input) = dims(w1)?;
        let (h2a, h2b) = dims(w2)?;
        let (out, h3) = dims(wh)?;
        if h2a != hidden || h2b != hidden || h3 != hidden {
            return Err(Error::invalid(format!(
                "inconsistent hidden sizes: w1 {:?}, w2 {:?}, head {:?}",
                w1.shape(),
                w2.shape(),
                wh.shape()
            )));
        }
        if b1.numel() != hidden || b2.numel() != hidden || bh.numel() != out {
            return Err(Error::invalid("bias length does not match its layer"));
        }
        Ok(Self {
            w1,
            b1: b1.data(),
            w2,
            b2: b2.data(),
            wh,
            bh: bh.data(),
            input,
            hidden,
            out,
        })
    }
}

/// `y[i] = act(W x[i] + b)` for every row of a batch.
fn affine<T: Scalar>(x: &[T], n: usize, w: &Tensor<T>, b: &[T], act: impl Fn(T) -> T) -> Vec<T> {
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    let mut y = Vec::with_capacity(n * rows);
    for xi in x.chunks_exact(cols).take(n) {
        for (wr, &br) in w.data().chunks_exact(cols).zip(b) {
            let mut acc = br;
            for (a, c) in wr.iter().zip(xi) {
                acc += *a * *c;
            }
            y.push(act(acc));
        }
    }
    y
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub n: usize,
    pub hidden1: Vec<T>,
    pub hidden2: Vec<T>,
    /// Reconstruction (`n x D`) or class probabilities (`n x K`).
    pub output: Vec<T>,
    pub out_dim: usize,
}

pub fn forward<T: Scalar>(
    weights: &ParameterSet<T>,
    inputs: &[T],
    n: usize,
    objective: Objective,
) -> Result<Forward<T>> {
    let l = Layers::bind(weights)?;
    if inputs.len() != n * l.input {
        return Err(Error::invalid(format!(
            "batch of {n} rows needs {} inputs, got {}",
            n * l.input,
            inputs.len()
        )));
    }
    let hidden1 = affine(inputs, n, l.w1, l.b1, T::tanh);
    let hidden2 = affine(&hidden1, n, l.w2, l.b2, T::tanh);
    let mut output = affine(&hidden2, n, l.wh, l.bh, |v| v);
    if objective == Objective::CrossEntropy {
        for row in output.chunks_exact_mut(l.out) {
            softmax_in_place(row);
        }
    }
    Ok(Forward {
        n,
        hidden1,
        hidden2,
        output,
        out_dim: l.out,
    })
}

fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Mean loss over the batch and its exact gradient for every parameter.
///
/// Reconstruction uses the mean squared error over all `n x D` entries; cross
/// entropy is averaged over rows.
pub fn backward<T: Scalar>(
    weights: &ParameterSet<T>,
    inputs: &[T],
    n: usize,
    targets: Targets<'_, T>,
    objective: Objective,
) -> Result<(T, ParameterSet<T>)> {
    if n == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let l = Layers::bind(weights)?;
    let fwd = forward(weights, inputs, n, objective)?;
    let out = l.out;
    let mut d_out = vec![T::zero(); n * out];
    let loss = match (objective, targets) {
        (Objective::MseReconstruction, Targets::Values(t)) => {
            if t.len() != n * out {
                return Err(Error::invalid("target values do not match the head output"));
            }
            let scale = T::of(1.0 / (n * out) as f64);
            let two = T::of(2.0);
            let mut loss = T::zero();
            for ((g, &o), &y) in d_out.iter_mut().zip(&fwd.output).zip(t) {
                let r = o - y;
                loss += r * r;
                *g = two * r * scale;
            }
            loss * scale
        }
        (Objective::CrossEntropy, Targets::Labels(y)) => {
            if y.len() != n || y.iter().any(|&c| c >= out) {
                return Err(Error::invalid(
                    "labels do not match the batch or class count",
                ));
            }
            let scale = T::of(1.0 / n as f64);
            let mut loss = T::zero();
            for ((g, p), &c) in d_out
                .chunks_exact_mut(out)
                .zip(fwd.output.chunks_exact(out))
                .zip(y)
            {
                loss -= p[c].max(T::min_positive_value()).ln();
                for (gk, &pk) in g.iter_mut().zip(p) {
                    *gk = pk * scale;
                }
                g[c] -= scale;
            }
            loss * scale
        }
        (obj, _) => {
            return Err(Error::invalid(format!(
                "targets do not match objective {obj:?}"
            )))
        }
    };

    let h = l.hidden;
    let (d_wh, d_bh, mut d_a2) = linear_backward(&d_out, &fwd.hidden2, l.wh, n);
    tanh_backward(&mut d_a2, &fwd.hidden2);
    let (d_w2, d_b2, mut d_a1) = linear_backward(&d_a2, &fwd.hidden1, l.w2, n);
    tanh_backward(&mut d_a1, &fwd.hidden1);
    let (d_w1, d_b1, _) = linear_backward(&d_a1, inputs, l.w1, n);

    let grads = ParameterSet::from_tensors([
        (W1, Tensor::new(vec![h, l.input], d_w1)?),
        (B1, Tensor::new(vec![h], d_b1)?),
        (W2, Tensor::new(vec![h, h], d_w2)?),
        (B2, Tensor::new(vec![h], d_b2)?),
        (WH, Tensor::new(vec![out, h], d_wh)?),
        (BH, Tensor::new(vec![out], d_bh)?),
    ])?;
    Ok((loss, grads))
}

/// Gradients of `y = W x + b` given `dy`: returns `(dW, db, dx)`.
fn linear_backward<T: Scalar>(
    dy: &[T],
    x: &[T],
    w: &Tensor<T>,
    n: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    let mut dw = vec![T::zero(); rows * cols];
    let mut db = vec![T::zero(); rows];
    let mut dx = vec![T::zero(); n * cols];
    for ((dyi, xi), dxi) in dy
        .chunks_exact(rows)
        .zip(x.chunks_exact(cols))
        .zip(dx.chunks_exact_mut(cols))
    {
        for (r, &g) in dyi.iter().enumerate() {
            db[r] += g;
            let wr = &w.data()[r * cols..(r + 1) * cols];
            let dwr = &mut dw[r * cols..(r + 1) * cols];
            for c in 0..cols {
                dwr[c] += g * xi[c];
                dxi[c] += g * wr[c];
            }
        }
    }
    (dw, db, dx)
}

fn tanh_backward<T: Scalar>(grad: &mut [T], activation: &[T]) {
    for (g, &a) in grad.iter_mut().zip(activation) {
        *g *= T::one() - a * a;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> ToyTaskConfig {
        ToyTaskConfig {
            classes: 3,
            latent_dim: 2,
            obs_dim: 4,
            hidden_dim: 3,
            ..ToyTaskConfig::default()
        }
    }

    fn classifier<T: Scalar>(cfg: &ToyTaskConfig) -> ParameterSet<T> {
        let mut ps = init_autoencoder::<T>(cfg);
        ps.remove(WH);
        ps.remove(BH);
        for (name, t) in init_classifier_head::<T>(cfg) {
            ps.insert(name, t).unwrap();
        }
        ps
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let ps = classifier::<f64>(&tiny_cfg()).zeros_like();
        let fwd = forward(&ps, &[0.3, -1.0, 2.0, 0.5], 1, Objective::CrossEntropy).unwrap();
        for p in &fwd.output {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn probability_rows_sum_to_one() {
        let ps = classifier::<f32>(&tiny_cfg());
        let x: Vec<f32> = (0..20).map(|i| (i as f32 * 0.37).sin() * 3.0).collect();
        let fwd = forward(&ps, &x, 5, Objective::CrossEntropy).unwrap();
        for row in fwd.output.chunks(3) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn single_row_matches_batched_row() {
        let ps = classifier::<f64>(&tiny_cfg());
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.61).cos()).collect();
        let batch = forward(&ps, &x, 3, Objective::CrossEntropy).unwrap();
        let one = forward(&ps, &x[4..8], 1, Objective::CrossEntropy).unwrap();
        assert_eq!(&batch.output[3..6], one.output.as_slice());
    }

    #[test]
    fn shape_errors() {
        let ps = classifier::<f64>(&tiny_cfg());
        assert!(forward(&ps, &[0.0; 3], 1, Objective::CrossEntropy).is_err());
        let mut broken = ps.clone();
        broken.remove(B2);
        assert!(forward(&broken, &[0.0; 4], 1, Objective::CrossEntropy).is_err());
        assert!("hinge".parse::<Objective>().is_err());
        assert!(backward(
            &ps,
            &[0.0; 4],
            1,
            Targets::Values(&[0.0; 3]),
            Objective::CrossEntropy
        )
        .is_err());
    }

    #[test]
    fn perfect_reconstruction_has_zero_decoder_gradient() {
        let cfg = tiny_cfg();
        let ae = init_autoencoder::<f64>(&cfg);
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.1 - 0.4).collect();
        let target = forward(&ae, &x, 2, Objective::MseReconstruction)
            .unwrap()
            .output;
        let (loss, g) = backward(
            &ae,
            &x,
            2,
            Targets::Values(&target),
            Objective::MseReconstruction,
        )
        .unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.get(WH).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(g.get(BH).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_batch_has_same_mean_gradient() {
        let cfg = tiny_cfg();
        let ps = classifier::<f64>(&cfg);
        let x: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let y = [0usize, 2];
        let (_, g1) = backward(&ps, &x, 2, Targets::Labels(&y), Objective::CrossEntropy).unwrap();
        let x2: Vec<f64> = x.iter().chain(x.iter()).copied().collect();
        let y2 = [0usize, 2, 0, 2];
        let (_, g2) = backward(&ps, &x2, 4, Targets::Labels(&y2), Objective::CrossEntropy).unwrap();
        for ((_, a), (_, b)) in g1.iter().zip(g2.iter()) {
            for (u, v) in a.data().iter().zip(b.data()) {
                assert!((u - v).abs() < 1e-14);
            }
        }
    }
}
