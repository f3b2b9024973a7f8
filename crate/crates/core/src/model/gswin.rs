use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::block::{BlockSpec, GswinBlock};
use super::config::ModelConfig;
use super::layers::{LayerNorm, Linear, PatchEmbed, PatchMerge};
use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor};

#[derive(Clone, Debug)]
pub struct Stage {
    pub blocks: Vec<GswinBlock>,
    pub merge: Option<PatchMerge>,
}

/// Hierarchical backbone: patch embedding, stages of window-gated blocks
/// with 2×2 patch merging in between, then norm → global mean pool → linear head.
#[derive(Clone, Debug)]
pub struct Gswin {
    config: ModelConfig,
    pub embed: PatchEmbed,
    pub stages: Vec<Stage>,
    pub head_norm: LayerNorm,
    pub head: Linear,
}

impl Gswin {
    /// Builds and initializes a model; the same seed gives the same weights.
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let embed = PatchEmbed::new("embed", config.patch_size, config.base_channels, &mut rng);
        let drop = config.drop_path_schedule();
        let mut block_index = 0;
        let mut stages = Vec::with_capacity(config.stage_count());
        for layout in config.stages() {
            let mut blocks = Vec::with_capacity(layout.depth);
            for b in 0..layout.depth {
                let spec = BlockSpec {
                    dim: layout.dim,
                    expansion: config.expansion,
                    heads: config.heads,
                    window: layout.window,
                    shifted: layout.block_shifted(b),
                    drop_prob: drop[block_index],
                    relative_bias: config.relative_bias,
                    sgu_init: config.sgu_init,
                };
                blocks.push(GswinBlock::new(&format!("stages.{}.blocks.{}", layout.index, b), spec, &mut rng)?);
                block_index += 1;
            }
            let merge = layout
                .merges
                .then(|| PatchMerge::new(&format!("stages.{}.merge", layout.index), layout.dim, &mut rng));
            stages.push(Stage { blocks, merge });
        }
        let final_dim = config.stage_dim(config.stage_count() - 1);
        Ok(Gswin {
            config: config.clone(),
            embed,
            stages,
            head_norm: LayerNorm::new("head_norm", final_dim),
            head: Linear::new("head", final_dim, config.num_classes, true, &mut rng),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn check_input(&self, image: &Tensor) -> Result<()> {
        let s = self.config.image_size;
        match *image.shape() {
            [_, h, w, 3] if h == s && w == s => Ok(()),
            _ => Err(Error::shape(
                "gswin",
                format!("expected [B, {s}, {s}, 3] images, got {:?}", image.shape()),
            )),
        }
    }

    /// Runs embedding and all stages; returns each stage's output before merging.
    fn run_stages(&self, image: &Tensor, mut rng: Option<&mut ChaCha8Rng>, upto: usize) -> Result<Vec<Tensor>> {
        self.check_input(image)?;
        let mut x = self.embed.forward(image)?;
        let mut outs = Vec::with_capacity(self.stages.len());
        for stage in self.stages.iter().take(upto) {
            for blk in &stage.blocks {
                x = blk.forward(&x, rng.as_deref_mut())?;
            }
            outs.push(x.clone());
            if let Some(m) = &stage.merge {
                x = m.forward(&x)?;
            }
        }
        Ok(outs)
    }

    /// Logits `[B, num_classes]`. Pass an RNG to enable stochastic depth (training).
    pub fn forward(&self, image: &Tensor, rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let outs = self.run_stages(image, rng, self.stages.len())?;
        let last = outs.last().expect("at least one stage");
        let (b, h, w, c) = (last.shape()[0], last.shape()[1], last.shape()[2], last.shape()[3]);
        let pooled = self.head_norm.forward(last)?.reshape(&[b, h * w, c])?.mean_axis(1)?;
        self.head.forward(&pooled)
    }

    /// Evaluation-mode forward.
    pub fn logits(&self, image: &Tensor) -> Result<Tensor> {
        self.forward(image, None)
    }

    /// Stage outputs at 1/4, 1/8, 1/16, 1/32 of the input (for a four-stage model).
    pub fn extract_pyramid(&self, image: &Tensor) -> Result<Vec<Tensor>> {
        self.run_stages(image, None, self.stages.len())
    }

    /// All parameters, in a fixed order; names are unique.
    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut v = self.embed.parameters();
        for stage in &self.stages {
            for blk in &stage.blocks {
                v.extend(blk.parameters());
            }
            if let Some(m) = &stage.merge {
                v.extend(m.parameters());
            }
        }
        v.extend(self.head_norm.parameters());
        v.extend(self.head.parameters());
        v
    }

    pub fn param_count(&self) -> usize {
        self.parameters().iter().map(|p| p.numel()).sum()
    }

    pub fn zero_grad(&self) {
        self.parameters().iter().for_each(|p| p.zero_grad());
    }

    /// Re-spreads stochastic depth linearly from 0 to `rate` over all blocks.
    pub fn set_drop_path_rate(&mut self, rate: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!("drop path rate {rate} outside [0, 1]")));
        }
        self.config.drop_path_rate = rate;
        let schedule = self.config.drop_path_schedule();
        let blocks = self.stages.iter_mut().flat_map(|s| s.blocks.iter_mut());
        for (blk, p) in blocks.zip(schedule) {
            blk.spec.drop_prob = p;
        }
        Ok(())
    }

    /// Block `layer` of stage `stage` (both zero-based).
    pub fn block(&self, stage: usize, layer: usize) -> Option<&GswinBlock> {
        self.stages.get(stage)?.blocks.get(layer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::micro_config;
    use std::collections::HashSet;

    #[test]
    fn names_are_unique() {
        let m = Gswin::new(&micro_config(), 0).unwrap();
        let names: HashSet<&str> = m.parameters().iter().map(|p| p.name()).collect();
        assert_eq!(names.len(), m.parameters().len());
    }

    #[test]
    fn rejects_wrong_image_size() {
        let m = Gswin::new(&micro_config(), 0).unwrap();
        assert!(m.logits(&Tensor::zeros(&[1, 16, 16, 3])).is_err());
        assert!(m.logits(&Tensor::zeros(&[1, 32, 32, 1])).is_err());
    }

    #[test]
    fn same_seed_same_weights() {
        let a = Gswin::new(&micro_config(), 7).unwrap();
        let b = Gswin::new(&micro_config(), 7).unwrap();
        for (p, q) in a.parameters().iter().zip(b.parameters()) {
            assert_eq!(p.tensor().to_vec(), q.tensor().to_vec());
        }
    }
}
