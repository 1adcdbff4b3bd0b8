use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::ToyTaskConfig;
use super::rng::Stream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Src,
    Tgt,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Src => "src",
            Domain::Tgt => "tgt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Unlabeled,
    Train,
    Dev,
}

impl Split {
    fn stream(self) -> Stream {
        match self {
            Split::Unlabeled => Stream::Unlabeled,
            Split::Train => Stream::Train,
            Split::Dev => Stream::Dev,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Unlabeled => "unlabeled",
            Split::Train => "train",
            Split::Dev => "dev",
        })
    }
}

/// `n x dim` row-major inputs with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDataset {
    pub domain: Domain,
    pub split: Split,
    pub dim: usize,
    pub classes: usize,
    pub inputs: Vec<f32>,
    pub labels: Vec<usize>,
}

impl ToyDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }
}

/// All six datasets of one seed plus the generating parameters.
#[derive(Debug, Clone)]
pub struct ToyTask {
    /// `classes x latent_dim` row-major class means.
    pub class_means: Vec<f64>,
    /// `obs_dim x latent_dim` row-major mixing matrices.
    pub mixing_src: Vec<f64>,
    pub mixing_tgt: Vec<f64>,
    datasets: Vec<ToyDataset>,
}

impl ToyTask {
    pub fn dataset(&self, domain: Domain, split: Split) -> &ToyDataset {
        self.datasets
            .iter()
            .find(|d| d.domain == domain && d.split == split)
            .expect("all six datasets are generated")
    }
}

/// Modified Gram-Schmidt on the columns of a `rows x cols` row-major matrix.
///
/// Equivalent to the Q factor of a QR decomposition whose R has a positive
/// diagonal, which makes the result unique.
pub fn orthonormalize(m: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    assert_eq!(m.len(), rows * cols);
    let mut q = m.to_vec();
    for j in 0..cols {
        for k in 0..j {
            let dot: f64 = (0..rows).map(|i| q[i * cols + j] * q[i * cols + k]).sum();
            for i in 0..rows {
                q[i * cols + j] -= dot * q[i * cols + k];
            }
        }
        let norm = (0..rows)
            .map(|i| q[i * cols + j].powi(2))
            .sum::<f64>()
            .sqrt();
        if norm <= f64::EPSILON {
            return Err(Error::invalid(format!("column {j} is linearly dependent")));
        }
        for i in 0..rows {
            q[i * cols + j] /= norm;
        }
    }
    Ok(q)
}

fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn mix<'a>(
    a: &'a [f64],
    z: &'a [f64],
    obs: usize,
    latent: usize,
) -> impl Iterator<Item = f32> + 'a {
    (0..obs).map(move |r| {
        a[r * latent..(r + 1) * latent]
            .iter()
            .zip(z)
            .map(|(x, y)| x * y)
            .sum::<f64>() as f32
    })
}

/// Generates source and target datasets for every split.
///
/// Both domains reuse the same latent draw for each index; only the mixing
/// matrix differs. With `shift_gamma == 0` the two domains are identical.
pub fn generate_task(cfg: &ToyTaskConfig) -> Result<ToyTask> {
    cfg.validate()?;
    let (k, d, obs) = (cfg.classes, cfg.latent_dim, cfg.obs_dim);
    let mut rng = Stream::Task.rng(cfg.seed);
    let class_means = gaussian(&mut rng, k * d);
    let mixing_src = orthonormalize(&gaussian(&mut rng, obs * d), obs, d)?;
    let perturbation = gaussian(&mut rng, obs * d);
    let mixing_tgt = if cfg.shift_gamma == 0.0 {
        mixing_src.clone()
    } else {
        let shifted: Vec<f64> = mixing_src
            .iter()
            .zip(&perturbation)
            .map(|(a, g)| a + cfg.shift_gamma * g)
            .collect();
        orthonormalize(&shifted, obs, d)?
    };

    let mut datasets = Vec::with_capacity(6);
    for (split, n) in [
        (Split::Unlabeled, cfg.n_unlabeled),
        (Split::Train, cfg.n_train),
        (Split::Dev, cfg.n_dev),
    ] {
        let mut rng = split.stream().rng(cfg.seed);
        let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        labels.shuffle(&mut rng);
        let mut src = Vec::with_capacity(n * obs);
        let mut tgt = Vec::with_capacity(n * obs);
        for &y in &labels {
            let z: Vec<f64> = class_means[y * d..(y + 1) * d]
                .iter()
                .map(|&mu| mu + cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            src.extend(mix(&mixing_src, &z, obs, d));
            tgt.extend(mix(&mixing_tgt, &z, obs, d));
        }
        for (domain, inputs) in [(Domain::Src, src), (Domain::Tgt, tgt)] {
            datasets.push(ToyDataset {
                domain,
                split,
                dim: obs,
                classes: k,
                inputs,
                labels: labels.clone(),
            });
        }
    }
    Ok(ToyTask {
        class_means,
        mixing_src,
        mixing_tgt,
        datasets,
    })
}
