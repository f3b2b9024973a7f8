use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub classes: usize,
    pub image_size: usize,
    pub train_size: usize,
    pub eval_size: usize,
    /// Standard deviation of the per-pixel Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig { classes: 10, image_size: 32, train_size: 4096, eval_size: 500, noise: 0.5, seed: 0 }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.image_size == 0 || self.train_size == 0 || self.eval_size == 0 {
            return Err(Error::Config("task needs >= 2 classes and non-empty images and splits".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Config(format!("noise {} must be finite and non-negative", self.noise)));
        }
        Ok(())
    }
}

/// Oriented sinusoidal gratings. Class `c` fixes an orientation and a spatial
/// frequency; phase, contrast and noise are drawn per image. Sample `i` of a
/// split is a pure function of `(seed, split, i)`, and the two splits draw from
/// separate random streams.
#[derive(Clone, Debug)]
pub struct SyntheticTask {
    config: TaskConfig,
    orientations: usize,
}

impl SyntheticTask {
    pub fn new(config: TaskConfig) -> Result<Self> {
        config.validate()?;
        let orientations = config.classes.div_ceil(2);
        Ok(SyntheticTask { config, orientations })
    }

    pub fn config(&self) -> &TaskConfig {
        &self.config
    }

    pub fn len(&self, split: Split) -> usize {
        match split {
            Split::Train => self.config.train_size,
            Split::Eval => self.config.eval_size,
        }
    }

    pub fn is_empty(&self, split: Split) -> bool {
        self.len(split) == 0
    }

    pub fn label(&self, index: usize) -> usize {
        index % self.config.classes
    }

    /// Orientation (radians) and frequency (cycles per image) of a class.
    pub fn class_pattern(&self, class: usize) -> (f64, f64) {
        let theta = PI * (class % self.orientations) as f64 / self.orientations as f64;
        let freq = 3.0 * (1 + class / self.orientations) as f64;
        (theta, freq)
    }

    /// `[S, S, 3]` pixels (row-major, channel last) and the label.
    pub fn sample(&self, split: Split, index: usize) -> (Vec<f64>, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let stream = match split {
            Split::Train => 0u64,
            Split::Eval => 1u64,
        };
        rng.set_stream((stream << 48) | index as u64);
        let label = self.label(index);
        let (theta, freq) = self.class_pattern(label);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let contrast = rng.gen_range(0.6..1.0);
        let noise = Normal::new(0.0, self.config.noise).expect("validated noise");
        let s = self.config.image_size;
        let (ct, st) = (theta.cos(), theta.sin());
        let mut px = Vec::with_capacity(s * s * 3);
        for r in 0..s {
            for c in 0..s {
                let u = (c as f64 + 0.5) / s as f64 - 0.5;
                let v = (r as f64 + 0.5) / s as f64 - 0.5;
                let g = contrast * (2.0 * PI * freq * (u * ct + v * st) + phase).cos();
                for _ in 0..3 {
                    px.push(g + noise.sample(&mut rng));
                }
            }
        }
        (px, label)
    }

    /// `[B, S, S, 3]` images and labels for the given sample indices.
    pub fn batch(&self, split: Split, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        let n = self.len(split);
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::Invalid(format!("sample {bad} out of range for a split of {n}")));
        }
        let s = self.config.image_size;
        let mut data = Vec::with_capacity(indices.len() * s * s * 3);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let (px, y) = self.sample(split, i);
            data.extend(px);
            labels.push(y);
        }
        Ok((Tensor::new(&[indices.len(), s, s, 3], data)?, labels))
    }
}
