use std::fmt;

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::config::ToyTaskConfig;
use super::data::{Domain, ToyDataset};
use super::model::{backward, forward, init_classifier_head, Objective, Targets, BH, WH};
use super::rng::Stream;
use crate::error::{Error, Result};
use crate::grid::{EvalSide, Evaluator};
use crate::tensor::{meta_keys, ParameterSet};

/// Which labeled data a fine-tuned checkpoint saw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrainingRole {
    Src,
    Tgt,
    Bilingual,
    Other,
}

impl TrainingRole {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainingRole::Src => "src",
            TrainingRole::Tgt => "tgt",
            TrainingRole::Bilingual => "bilingual",
            TrainingRole::Other => "other",
        }
    }

    fn shuffle_stream(self) -> Stream {
        Stream::FinetuneShuffle(self as u8)
    }
}

impl fmt::Display for TrainingRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const EVAL_CHUNK: usize = 256;

/// Minibatch Adam over the pooled rows of `data`, reshuffled every epoch.
fn train(
    mut weights: ParameterSet<f32>,
    data: &[&ToyDataset],
    objective: Objective,
    epochs: usize,
    cfg: &ToyTaskConfig,
    stream: Stream,
) -> Result<ParameterSet<f32>> {
    let rows: Vec<(usize, usize)> = data
        .iter()
        .enumerate()
        .flat_map(|(k, d)| (0..d.len()).map(move |i| (k, i)))
        .collect();
    if rows.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let dim = data[0].dim;
    if data.iter().any(|d| d.dim != dim) {
        return Err(Error::invalid("training sets disagree on input dimension"));
    }
    let adam = AdamConfig::new(cfg.learning_rate);
    let mut state = AdamState::zeros_like(&weights);
    let mut rng = stream.rng(cfg.seed);
    let mut order = rows;
    let mut step = 0u64;
    let mut inputs = Vec::with_capacity(cfg.batch_size * dim);
    let mut labels = Vec::with_capacity(cfg.batch_size);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            inputs.clear();
            labels.clear();
            for &(k, i) in batch {
                inputs.extend_from_slice(data[k].row(i));
                labels.push(data[k].labels[i]);
            }
            let targets = match objective {
                Objective::MseReconstruction => Targets::Values(&inputs),
                Objective::CrossEntropy => Targets::Labels(&labels),
            };
            let (_, grads) = backward(&weights, &inputs, batch.len(), targets, objective)?;
            step += 1;
            adam_step(&mut weights, &grads, &mut state, step, &adam)?;
        }
    }
    Ok(weights)
}

/// Trains encoder and decoder on reconstruction of the pooled corpus.
pub fn train_autoencoder(
    init: &ParameterSet<f32>,
    corpus: &[&ToyDataset],
    cfg: &ToyTaskConfig,
) -> Result<ParameterSet<f32>> {
    train(
        init.clone(),
        corpus,
        Objective::MseReconstruction,
        cfg.pretrain_epochs,
        cfg,
        Stream::PretrainShuffle,
    )
}

/// Autoencoder pretraining; returns the encoder with a fresh classifier head.
pub fn pretrain_autoencoder(
    init: &ParameterSet<f32>,
    corpus: &[&ToyDataset],
    cfg: &ToyTaskConfig,
) -> Result<ParameterSet<f32>> {
    let mut out = train_autoencoder(init, corpus, cfg)?;
    out.remove(WH);
    out.remove(BH);
    for (name, t) in init_classifier_head(cfg) {
        out.insert(name, t)?;
    }
    out.set_meta(meta_keys::ROLE, "pretrained");
    Ok(out)
}

/// Mean squared reconstruction error of an autoencoder over `data`.
pub fn reconstruction_mse(ae: &ParameterSet<f32>, data: &ToyDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let mut sse = 0.0f64;
    for (chunk, inputs) in data.inputs.chunks(EVAL_CHUNK * data.dim).enumerate() {
        let n = inputs.len() / data.dim;
        let fwd = forward(ae, inputs, n, Objective::MseReconstruction)
            .map_err(|e| Error::invalid(format!("chunk {chunk}: {e}")))?;
        sse += fwd
            .output
            .iter()
            .zip(inputs)
            .map(|(o, x)| f64::from(o - x).powi(2))
            .sum::<f64>();
    }
    Ok(sse / data.inputs.len() as f64)
}

/// Cross-entropy fine-tuning of encoder and head on the concatenated `data`.
pub fn finetune(
    pretrained: &ParameterSet<f32>,
    data: &[&ToyDataset],
    role: TrainingRole,
    cfg: &ToyTaskConfig,
) -> Result<ParameterSet<f32>> {
    let mut out = train(
        pretrained.clone(),
        data,
        Objective::CrossEntropy,
        cfg.finetune_epochs,
        cfg,
        role.shuffle_stream(),
    )?;
    out.set_meta(meta_keys::ROLE, role.as_str());
    out.set_meta(meta_keys::SEED, cfg.seed.to_string());
    out.set_meta(meta_keys::ARCH, cfg.arch_tag());
    Ok(out)
}

/// Fraction of rows whose argmax class (lowest index on ties) is the label.
pub fn evaluate_accuracy(weights: &ParameterSet<f32>, dev: &ToyDataset) -> Result<f64> {
    if dev.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let mut correct = 0usize;
    for (inputs, labels) in dev
        .inputs
        .chunks(EVAL_CHUNK * dev.dim)
        .zip(dev.labels.chunks(EVAL_CHUNK))
    {
        let fwd = forward(weights, inputs, labels.len(), Objective::CrossEntropy)?;
        for (probs, &y) in fwd.output.chunks_exact(fwd.out_dim).zip(labels) {
            let mut best = 0;
            for (k, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = k;
                }
            }
            correct += usize::from(best == y);
        }
    }
    Ok(correct as f64 / dev.len() as f64)
}

/// Dev-set accuracy on a source and a target dataset.
#[derive(Debug, Clone)]
pub struct ToyEvaluator {
    source: ToyDataset,
    target: ToyDataset,
    ids: [String; 2],
}

impl ToyEvaluator {
    pub fn new(source: ToyDataset, target: ToyDataset, cfg: &ToyTaskConfig) -> Self {
        let cfg_digest = hex::encode(Sha256::digest(
            serde_json::to_vec(cfg).expect("config serializes"),
        ));
        let id = |d: &ToyDataset| format!("toy:{}:{}:{}", &cfg_digest[..16], d.domain, d.split);
        let ids = [id(&source), id(&target)];
        Self {
            source,
            target,
            ids,
        }
    }

    /// The same datasets with source and target exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
            ids: [self.ids[1].clone(), self.ids[0].clone()],
        }
    }

    pub fn dataset(&self, side: EvalSide) -> &ToyDataset {
        match side {
            EvalSide::Source => &self.source,
            EvalSide::Target => &self.target,
        }
    }

    pub fn source_domain(&self) -> Domain {
        self.source.domain
    }
}

impl Evaluator for ToyEvaluator {
    fn metric(&self) -> &str {
        "acc"
    }

    fn dataset_id(&self, side: EvalSide) -> String {
        match side {
            EvalSide::Source => self.ids[0].clone(),
            EvalSide::Target => self.ids[1].clone(),
        }
    }

    fn evaluate(&self, params: &ParameterSet<f32>, side: EvalSide) -> Result<f64> {
        evaluate_accuracy(params, self.dataset(side))
    }
}
