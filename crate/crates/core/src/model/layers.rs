use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor, LAYER_NORM_EPS};

const INIT_STD: f64 = 0.02;

/// Affine map over the last axis: `x · W + b` with `W: [in, out]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Option<Parameter>,
}

impl Linear {
    pub fn new(name: &str, input: usize, output: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let w = Tensor::from_fn(&[input, output], |_| normal.sample(rng));
        Linear {
            weight: Parameter::new(format!("{name}.weight"), w, true),
            bias: bias.then(|| Parameter::new(format!("{name}.bias"), Tensor::zeros(&[output]), false)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let shape = x.shape().to_vec();
        let input = *shape.last().ok_or_else(|| Error::shape("linear", "rank-0 input"))?;
        if input != self.input_dim() {
            return Err(Error::shape(
                "linear",
                format!("{} input channels for a {}→{} layer", input, self.input_dim(), self.output_dim()),
            ));
        }
        let rows = x.numel() / input.max(1);
        let mut y = x.reshape(&[rows, input])?.matmul(self.weight.tensor())?;
        if let Some(b) = &self.bias {
            y = y.add_bias(b.tensor())?;
        }
        let mut out_shape = shape;
        *out_shape.last_mut().unwrap() = self.output_dim();
        y.reshape(&out_shape)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut v = vec![&self.weight];
        v.extend(self.bias.as_ref());
        v
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: Parameter,
    pub beta: Parameter,
}

impl LayerNorm {
    pub fn new(name: &str, dim: usize) -> Self {
        LayerNorm {
            gamma: Parameter::new(format!("{name}.gamma"), Tensor::full(&[dim], 1.0), false),
            beta: Parameter::new(format!("{name}.beta"), Tensor::zeros(&[dim]), false),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        x.layer_norm(self.gamma.tensor(), self.beta.tensor(), LAYER_NORM_EPS)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.gamma, &self.beta]
    }
}

/// Non-overlapping `p×p` RGB patches projected to `C` channels, then normalized.
#[derive(Clone, Debug)]
pub struct PatchEmbed {
    pub patch: usize,
    pub proj: Linear,
    pub norm: LayerNorm,
}

impl PatchEmbed {
    pub fn new(name: &str, patch: usize, channels: usize, rng: &mut impl Rng) -> Self {
        PatchEmbed {
            patch,
            proj: Linear::new(&format!("{name}.proj"), patch * patch * 3, channels, true, rng),
            norm: LayerNorm::new(&format!("{name}.norm"), channels),
        }
    }

    /// `[B, H, W, 3] -> [B, H/p, W/p, C]`
    pub fn forward(&self, image: &Tensor) -> Result<Tensor> {
        let tokens = patchify(image, self.patch)?;
        self.norm.forward(&self.proj.forward(&tokens)?)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut v = self.proj.parameters();
        v.extend(self.norm.parameters());
        v
    }
}

/// `[B, H, W, C] -> [B, H/p, W/p, p·p·C]`, each patch flattened row-major.
pub fn patchify(x: &Tensor, p: usize) -> Result<Tensor> {
    let (b, h, w, c) = match *x.shape() {
        [b, h, w, c] => (b, h, w, c),
        _ => return Err(Error::shape("patchify", format!("expected [B, H, W, C], got {:?}", x.shape()))),
    };
    if p == 0 || h % p != 0 || w % p != 0 {
        return Err(Error::shape("patchify", format!("{h}x{w} not divisible into {p}x{p} patches")));
    }
    x.reshape(&[b, h / p, p, w / p, p, c])?
        .permute(&[0, 1, 3, 2, 4, 5])?
        .reshape(&[b, h / p, w / p, p * p * c])
}

/// 2×2 neighbourhoods concatenated (`4d`), normalized, projected to `2d`.
#[derive(Clone, Debug)]
pub struct PatchMerge {
    pub norm: LayerNorm,
    pub reduction: Linear,
}

impl PatchMerge {
    pub fn new(name: &str, dim: usize, rng: &mut impl Rng) -> Self {
        PatchMerge {
            norm: LayerNorm::new(&format!("{name}.norm"), 4 * dim),
            reduction: Linear::new(&format!("{name}.reduction"), 4 * dim, 2 * dim, true, rng),
        }
    }

    /// `[B, H, W, d] -> [B, H/2, W/2, 2d]`
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() == 4 && (!x.shape()[1].is_multiple_of(2) || !x.shape()[2].is_multiple_of(2)) {
            return Err(Error::shape("patch_merge", format!("odd spatial extent in {:?}", x.shape())));
        }
        let grouped = patchify(x, 2)?;
        self.reduction.forward(&self.norm.forward(&grouped)?)
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut v = self.norm.parameters();
        v.extend(self.reduction.parameters());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn patch_embed_shapes_and_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pe = PatchEmbed::new("embed", 4, 8, &mut rng);
        let y = pe.forward(&Tensor::zeros(&[2, 16, 12, 3])).unwrap();
        assert_eq!(y.shape(), &[2, 4, 3, 8]);
        let count: usize = pe.parameters().iter().map(|p| p.numel()).sum();
        assert_eq!(count, 4 * 4 * 3 * 8 + 8 + 2 * 8);
        assert!(pe.forward(&Tensor::zeros(&[1, 10, 12, 3])).is_err());
    }

    #[test]
    fn zero_image_embeds_to_zero_before_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pe = PatchEmbed::new("embed", 4, 8, &mut rng);
        let tokens = patchify(&Tensor::zeros(&[1, 8, 8, 3]), 4).unwrap();
        let y = pe.proj.forward(&tokens).unwrap();
        assert!(y.to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn patchify_layout() {
        // one channel, 4x4 image with value = row*4 + col, 2x2 patches
        let x = Tensor::from_fn(&[1, 4, 4, 1], |i| i as f64);
        let p = patchify(&x, 2).unwrap();
        assert_eq!(p.shape(), &[1, 2, 2, 4]);
        assert_eq!(&p.to_vec()[..4], &[0.0, 1.0, 4.0, 5.0]);
        assert_eq!(&p.to_vec()[12..], &[10.0, 11.0, 14.0, 15.0]);
    }

    #[test]
    fn merge_shapes_count_and_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = PatchMerge::new("merge", 6, &mut rng);
        let y = m.forward(&Tensor::zeros(&[1, 4, 4, 6])).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2, 12]);
        let count: usize = m.parameters().iter().map(|p| p.numel()).sum();
        assert_eq!(count, 24 * 12 + 12 + 2 * 24);
        assert!(m.forward(&Tensor::zeros(&[1, 3, 4, 6])).is_err());

        let y = m.forward(&Tensor::full(&[1, 4, 4, 6], 0.7)).unwrap().to_vec();
        for px in y.chunks(12) {
            assert_eq!(px, &y[..12]);
        }
    }
}
