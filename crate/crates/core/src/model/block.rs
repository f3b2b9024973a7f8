use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::layers::{LayerNorm, Linear};
use crate::error::Result;
use crate::sgu::{multi_head_window_sgu, SguInit, SguParams, WindowGrid};
use crate::tensor::{Parameter, Tensor};

/// Static description of one block; everything the forward pass needs besides weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockSpec {
    pub dim: usize,
    pub expansion: usize,
    pub heads: usize,
    pub window: usize,
    pub shifted: bool,
    pub drop_prob: f64,
    pub relative_bias: bool,
    pub sgu_init: SguInit,
}

/// Pre-norm gated-MLP block with window spatial gating:
/// `x + drop_path(proj_out(sgu(gelu(proj_in(norm(x))))))`.
#[derive(Clone, Debug)]
pub struct GswinBlock {
    pub spec: BlockSpec,
    pub norm: LayerNorm,
    pub proj_in: Linear,
    pub sgu: SguParams,
    pub proj_out: Linear,
}

impl GswinBlock {
    pub fn new(name: &str, spec: BlockSpec, rng: &mut impl Rng) -> Result<Self> {
        let hidden = spec.expansion * spec.dim;
        Ok(GswinBlock {
            spec,
            norm: LayerNorm::new(&format!("{name}.norm"), spec.dim),
            proj_in: Linear::new(&format!("{name}.proj_in"), spec.dim, hidden, true, rng),
            sgu: SguParams::init(
                &format!("{name}.sgu"),
                (spec.window, spec.window),
                spec.heads,
                spec.relative_bias,
                spec.sgu_init,
                rng,
            )?,
            proj_out: Linear::new(&format!("{name}.proj_out"), hidden / 2, spec.dim, true, rng),
        })
    }

    pub fn grid(&self, height: usize, width: usize) -> Result<WindowGrid> {
        let window = (self.spec.window, self.spec.window);
        if self.spec.shifted {
            WindowGrid::shifted((height, width), window)
        } else {
            WindowGrid::unshifted((height, width), window)
        }
    }

    /// Residual branch only.
    pub fn branch(&self, x: &Tensor) -> Result<Tensor> {
        let grid = self.grid(x.shape()[1], x.shape()[2])?;
        let h = self.proj_in.forward(&self.norm.forward(x)?)?.gelu();
        let h = multi_head_window_sgu(&h, &self.sgu, &grid)?;
        self.proj_out.forward(&h)
    }

    /// With `rng` present the branch is dropped per sample with probability
    /// `drop_prob` and survivors are scaled by `1 / (1 - drop_prob)`; without it
    /// the branch is always kept unscaled.
    pub fn forward(&self, x: &Tensor, rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let branch = self.branch(x)?;
        let branch = match rng {
            Some(rng) if self.spec.drop_prob > 0.0 => {
                let keep = 1.0 - self.spec.drop_prob;
                let factors: Vec<f64> = (0..x.shape()[0])
                    .map(|_| if keep > 0.0 && rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                branch.scale_rows(&factors)?
            }
            _ => branch,
        };
        x.add(&branch)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut v = self.norm.parameters();
        v.extend(self.proj_in.parameters());
        v.extend(self.sgu.parameters());
        v.extend(self.proj_out.parameters());
        v
    }
}
