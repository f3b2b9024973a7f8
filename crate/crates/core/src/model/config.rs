use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sgu::SguInit;

fn default_expansion() -> usize {
    6
}
fn default_patch() -> usize {
    4
}
fn default_true() -> bool {
    true
}

/// Shape of a gSwin backbone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Channel extent `C` of the first stage; stage `s` carries `C·2^s`.
    pub base_channels: usize,
    /// Blocks per stage.
    pub depths: Vec<usize>,
    /// Spatial-gating heads `K`, shared by all stages.
    pub heads: usize,
    /// Square window side.
    pub window: usize,
    /// Hidden width of a block is `expansion · d`, gated down to `expansion/2 · d`.
    #[serde(default = "default_expansion")]
    pub expansion: usize,
    /// Largest stochastic-depth rate, reached by the last block.
    #[serde(default)]
    pub drop_path_rate: f64,
    pub num_classes: usize,
    /// Square input side in pixels.
    pub image_size: usize,
    #[serde(default = "default_patch")]
    pub patch_size: usize,
    #[serde(default = "default_true")]
    pub relative_bias: bool,
    #[serde(default)]
    pub sgu_init: SguInit,
}

/// Layout of one stage after window clamping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageLayout {
    pub index: usize,
    pub depth: usize,
    pub dim: usize,
    pub resolution: usize,
    /// Window side actually used: the configured window clamped to the resolution.
    pub window: usize,
    /// Whether odd blocks shift their windows (needs a window of at least 2).
    pub shifts: bool,
    pub merges: bool,
}

impl StageLayout {
    pub fn block_shifted(&self, block: usize) -> bool {
        self.shifts && block % 2 == 1
    }
}

impl ModelConfig {
    pub fn stage_count(&self) -> usize {
        self.depths.len()
    }

    pub fn total_blocks(&self) -> usize {
        self.depths.iter().sum()
    }

    pub fn stage_dim(&self, stage: usize) -> usize {
        self.base_channels << stage
    }

    /// Channel extent entering each half of the gate in `stage`.
    pub fn gate_dim(&self, stage: usize) -> usize {
        self.expansion / 2 * self.stage_dim(stage)
    }

    pub fn stages(&self) -> Vec<StageLayout> {
        let n = self.stage_count();
        (0..n)
            .map(|s| {
                let resolution = (self.image_size / self.patch_size) >> s;
                let window = self.window.min(resolution);
                StageLayout {
                    index: s,
                    depth: self.depths[s],
                    dim: self.stage_dim(s),
                    resolution,
                    window,
                    shifts: window >= 2,
                    merges: s + 1 < n,
                }
            })
            .collect()
    }

    /// Stochastic-depth rate of every block, rising linearly from 0 to `drop_path_rate`.
    pub fn drop_path_schedule(&self) -> Vec<f64> {
        let n = self.total_blocks();
        (0..n)
            .map(|i| if n > 1 { self.drop_path_rate * i as f64 / (n - 1) as f64 } else { 0.0 })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.depths.is_empty() || self.depths.contains(&0) {
            return bad(format!("depths must be non-empty and positive, got {:?}", self.depths));
        }
        if self.base_channels == 0 || self.heads == 0 || self.window == 0 || self.num_classes == 0 {
            return bad("base_channels, heads, window and num_classes must be positive".into());
        }
        if self.expansion < 2 || !self.expansion.is_multiple_of(2) {
            return bad(format!("expansion must be an even number >= 2, got {}", self.expansion));
        }
        if self.patch_size == 0 || self.image_size == 0 || !self.image_size.is_multiple_of(self.patch_size) {
            return bad(format!("image size {} not divisible by patch size {}", self.image_size, self.patch_size));
        }
        let grid = self.image_size / self.patch_size;
        let merges = self.stage_count() - 1;
        if !grid.is_multiple_of(1 << merges) {
            return bad(format!(
                "token grid {grid} cannot be halved {merges} times; use an image side divisible by {}",
                self.patch_size << merges
            ));
        }
        for s in 0..self.stage_count() {
            let g = self.gate_dim(s);
            if !g.is_multiple_of(self.heads) {
                return bad(format!("{} heads do not divide the {g} gate channels of stage {}", self.heads, s + 1));
            }
        }
        if !(0.0..=1.0).contains(&self.drop_path_rate) {
            return bad(format!("drop_path_rate {} outside [0, 1]", self.drop_path_rate));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ModelConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn with_heads(mut self, heads: usize) -> Self {
        self.heads = heads;
        self
    }

    pub fn with_relative_bias(mut self, on: bool) -> Self {
        self.relative_bias = on;
        self
    }
}

/// Stochastic-depth maxima per downstream task.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DropPathRates {
    pub imagenet: f64,
    pub coco: f64,
    pub ade20k: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub config: ModelConfig,
    pub drop_path: DropPathRates,
}

fn imagenet(base_channels: usize, depths: [usize; 4], heads: usize, drop: f64) -> ModelConfig {
    ModelConfig {
        base_channels,
        depths: depths.to_vec(),
        heads,
        window: 7,
        expansion: 6,
        drop_path_rate: drop,
        num_classes: 1000,
        image_size: 224,
        patch_size: 4,
        relative_bias: true,
        sgu_init: SguInit::NearIdentity,
    }
}

pub fn presets() -> Vec<Preset> {
    vec![
        Preset {
            name: "gswin-vt",
            config: imagenet(60, [2, 4, 10, 4], 6, 0.25),
            drop_path: DropPathRates { imagenet: 0.25, coco: 0.25, ade20k: 0.2 },
        },
        Preset {
            name: "gswin-t",
            config: imagenet(64, [4, 4, 16, 4], 12, 0.35),
            drop_path: DropPathRates { imagenet: 0.35, coco: 0.3, ade20k: 0.3 },
        },
        Preset {
            name: "gswin-s",
            config: imagenet(72, [4, 4, 32, 4], 12, 0.5),
            drop_path: DropPathRates { imagenet: 0.5, coco: 0.4, ade20k: 0.4 },
        },
    ]
}

/// Desk-scale model for the synthetic task: 32² input, 10 classes.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        base_channels: 16,
        depths: vec![2, 2, 2, 2],
        heads: 4,
        window: 4,
        expansion: 6,
        drop_path_rate: 0.1,
        num_classes: 10,
        image_size: 32,
        patch_size: 4,
        relative_bias: true,
        sgu_init: SguInit::NearIdentity,
    }
}

/// Smallest config that still has four stages and shifted windows; used for exhaustive gradient checks.
pub fn micro_config() -> ModelConfig {
    ModelConfig {
        base_channels: 4,
        depths: vec![2, 2, 2, 2],
        heads: 2,
        window: 4,
        expansion: 6,
        drop_path_rate: 0.0,
        num_classes: 3,
        image_size: 32,
        patch_size: 4,
        relative_bias: true,
        sgu_init: SguInit::NearIdentity,
    }
}

/// Resolves a preset name (`gswin-vt`, `gswin-t`, `gswin-s`, `gswin-tiny`, `gswin-micro`).
pub fn preset(name: &str) -> Option<ModelConfig> {
    match name {
        "gswin-tiny" => Some(tiny_config()),
        "gswin-micro" => Some(micro_config()),
        _ => presets().into_iter().find(|p| p.name == name).map(|p| p.config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_with_even_depths() {
        for p in presets() {
            p.config.validate().unwrap();
            assert!(p.config.depths.iter().all(|d| d % 2 == 0), "{}", p.name);
            assert_eq!(p.config.window, 7);
        }
        tiny_config().validate().unwrap();
        micro_config().validate().unwrap();
    }

    #[test]
    fn gswin_t_stage_layout() {
        let cfg = preset("gswin-t").unwrap();
        let st = cfg.stages();
        let res: Vec<usize> = st.iter().map(|s| s.resolution).collect();
        let dims: Vec<usize> = st.iter().map(|s| s.dim).collect();
        assert_eq!(res, vec![56, 28, 14, 7]);
        assert_eq!(dims, vec![64, 128, 256, 512]);
        assert!(st.iter().all(|s| s.window == 7 && s.shifts));
        assert!(!st[0].block_shifted(0) && st[0].block_shifted(1));
        assert!(!st[3].merges);
    }

    #[test]
    fn tiny_windows_clamp_to_resolution() {
        let st = tiny_config().stages();
        let w: Vec<(usize, usize, bool)> = st.iter().map(|s| (s.resolution, s.window, s.shifts)).collect();
        assert_eq!(w, vec![(8, 4, true), (4, 4, true), (2, 2, true), (1, 1, false)]);
    }

    #[test]
    fn drop_path_schedule_is_linear() {
        let cfg = preset("gswin-vt").unwrap();
        let s = cfg.drop_path_schedule();
        assert_eq!(s.len(), 20);
        assert_eq!(s[0], 0.0);
        assert!((s[19] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn validation_errors() {
        let mut cfg = tiny_config();
        cfg.heads = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.image_size = 30;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.image_size = 16;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = preset("gswin-s").unwrap().with_relative_bias(false);
        let back = ModelConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert!(ModelConfig::from_toml_str("base_channels = 4\nbogus = 1").is_err());
    }
}
