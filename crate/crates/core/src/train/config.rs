use std::path::Path;

use serde::{Deserialize, Serialize};

use super::data::TaskConfig;
use crate::error::{Error, Result};
use crate::model::{tiny_config, ModelConfig};

/// Optimizer, schedule and regularization settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub batch_size: usize,
    /// Largest stochastic-depth rate; overrides the model's own.
    pub drop_path: f64,
    pub label_smoothing: f64,
    pub seed: u64,
    /// Evaluate every this many steps (and always after the last one); 0 evaluates only at the end.
    pub eval_interval: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            weight_decay: 0.05,
            warmup_steps: 100,
            total_steps: 2000,
            batch_size: 32,
            drop_path: 0.1,
            label_smoothing: 0.1,
            seed: 0,
            eval_interval: 250,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.total_steps == 0 || self.batch_size == 0 {
            return bad("total_steps and batch_size must be positive".into());
        }
        if self.warmup_steps > self.total_steps {
            return bad(format!("warmup_steps {} exceeds total_steps {}", self.warmup_steps, self.total_steps));
        }
        let rates = [self.lr, self.weight_decay, self.drop_path, self.label_smoothing, self.eps];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return bad("rates must be finite and non-negative".into());
        }
        if self.drop_path > 1.0 || self.label_smoothing > 1.0 {
            return bad("drop_path and label_smoothing must not exceed 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// Everything `gswin train` reads from its config file: `[model]`, `[train]` and `[task]` tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "tiny_config")]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub task: TaskConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { model: tiny_config(), train: TrainConfig::default(), task: TaskConfig::default() }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.task.validate()?;
        if self.model.num_classes != self.task.classes {
            return Err(Error::Config(format!(
                "model has {} classes, task has {}",
                self.model.num_classes, self.task.classes
            )));
        }
        if self.model.image_size != self.task.image_size {
            return Err(Error::Config(format!(
                "model expects {}px images, task makes {}px",
                self.model.image_size, self.task.image_size
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_run() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.train.total_steps = 170;
        cfg.model.heads = 2;
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml_str("[train]\nwarmup_steps = 10\ntotal_steps = 5\n").is_err());
        assert!(RunConfig::from_toml_str("[train]\nlr = -1.0\n").is_err());
        assert!(RunConfig::from_toml_str("[train]\nlearning_rate = 0.1\n").is_err());
        assert!(RunConfig::from_toml_str("[task]\nclasses = 4\n").is_err());
    }
}
