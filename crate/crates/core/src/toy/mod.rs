//! Synthetic two-domain transfer lab.
//!
//! Two "languages" share a latent class structure but reach the observation
//! space through different orthonormal mixing matrices. An MLP encoder is
//! pretrained as an autoencoder on unlabeled data from both domains, then
//! fine-tuned three times from the same weights (source only, target only,
//! both). The resulting checkpoints and a dev-set accuracy evaluator feed the
//! interpolation grids.

mod adam;
mod config;
mod data;
mod experiment;
mod model;
mod rng;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use config::ToyTaskConfig;
pub use data::{generate_task, orthonormalize, Domain, Split, ToyDataset, ToyTask};
pub use experiment::{
    compare_encoder_flatness, run_seed, run_transfer_experiment, target_surface, ExperimentOptions,
    ExperimentOutput, FlatnessComparison, SeedRun, INIT_META, TASK_TAG,
};
pub use model::{
    backward, forward, init_autoencoder, init_classifier_head, Forward, Objective, Targets,
};
pub use rng::Stream;
pub use train::{
    evaluate_accuracy, finetune, pretrain_autoencoder, reconstruction_mse, train_autoencoder,
    ToyEvaluator, TrainingRole,
};
