use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Synthetic task and training protocol. Every field has a default, so a JSON
/// file may set only the fields it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyTaskConfig {
    pub classes: usize,
    pub latent_dim: usize,
    pub obs_dim: usize,
    pub hidden_dim: usize,
    pub shift_gamma: f64,
    pub noise_sigma: f64,
    pub n_unlabeled: usize,
    pub n_train: usize,
    pub n_dev: usize,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ToyTaskConfig {
    fn default() -> Self {
        Self {
            classes: 5,
            latent_dim: 8,
            obs_dim: 32,
            hidden_dim: 32,
            shift_gamma: 0.3,
            noise_sigma: 0.5,
            n_unlabeled: 4000,
            n_train: 2000,
            n_dev: 1000,
            pretrain_epochs: 20,
            finetune_epochs: 10,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

impl ToyTaskConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.classes < 2 {
            return fail(format!("classes must be >= 2, got {}", self.classes));
        }
        if self.latent_dim == 0 || self.latent_dim > self.obs_dim {
            return fail(format!(
                "need 0 < latent_dim <= obs_dim, got {} and {}",
                self.latent_dim, self.obs_dim
            ));
        }
        if self.hidden_dim == 0 {
            return fail("hidden_dim must be positive".into());
        }
        if !(self.shift_gamma >= 0.0 && self.shift_gamma.is_finite()) {
            return fail(format!(
                "shift_gamma must be >= 0, got {}",
                self.shift_gamma
            ));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise_sigma must be > 0, got {}", self.noise_sigma));
        }
        if self.n_unlabeled == 0 || self.n_train == 0 || self.n_dev == 0 {
            return fail("dataset sizes must be positive".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Architecture tag stored in checkpoint meta.
    pub fn arch_tag(&self) -> String {
        format!(
            "mlp-tanh:{}-{}-{}:{}",
            self.obs_dim, self.hidden_dim, self.hidden_dim, self.classes
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: ToyTaskConfig = serde_json::from_str(r#"{"hidden_dim": 16, "seed": 4}"#).unwrap();
        assert_eq!(cfg.hidden_dim, 16);
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.classes, 5);
        cfg.validate().unwrap();
        assert!(serde_json::from_str::<ToyTaskConfig>(r#"{"hiden_dim": 16}"#).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let base = ToyTaskConfig::default();
        for bad in [
            ToyTaskConfig {
                classes: 1,
                ..base.clone()
            },
            ToyTaskConfig {
                latent_dim: 40,
                ..base.clone()
            },
            ToyTaskConfig {
                noise_sigma: 0.0,
                ..base.clone()
            },
            ToyTaskConfig {
                n_train: 0,
                ..base.clone()
            },
            ToyTaskConfig {
                learning_rate: -1.0,
                ..base.clone()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
