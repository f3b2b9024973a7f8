use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::Tensor;
use crate::error::{Error, Result};

/// Default epsilon inside the layer-norm variance.
pub const LAYER_NORM_EPS: f64 = 1e-5;

fn gelu_value(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

fn gelu_slope(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    cdf + x * pdf
}

impl Tensor {
    /// Exact (erf) Gaussian error linear unit.
    pub fn gelu(&self) -> Tensor {
        let data = self.data().iter().map(|&x| gelu_value(x)).collect();
        let x = self.clone();
        Tensor::from_op(
            "gelu",
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g| {
                vec![Some(g.iter().zip(x.data().iter()).map(|(g, &x)| g * gelu_slope(x)).collect())]
            }),
        )
    }

    /// Normalizes over the last axis, then applies `gamma`/`beta`.
    pub fn layer_norm(&self, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
        let c = *self.shape().last().ok_or_else(|| Error::shape("layer_norm", "rank-0 input"))?;
        if c == 0 {
            return Err(Error::shape("layer_norm", "zero channels"));
        }
        if gamma.shape() != [c] || beta.shape() != [c] {
            return Err(Error::shape(
                "layer_norm",
                format!("gamma {:?} / beta {:?} for {} channels", gamma.shape(), beta.shape(), c),
            ));
        }
        let rows = self.numel() / c;
        let mut xhat = vec![0.0; rows * c];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; rows * c];
        {
            let x = self.data();
            let (gm, bt) = (gamma.data(), beta.data());
            for r in 0..rows {
                let row = &x[r * c..(r + 1) * c];
                let mean = row.iter().sum::<f64>() / c as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
                let is = 1.0 / (var + eps).sqrt();
                inv_std[r] = is;
                for j in 0..c {
                    let h = (row[j] - mean) * is;
                    xhat[r * c + j] = h;
                    out[r * c + j] = h * gm[j] + bt[j];
                }
            }
        }
        let gamma_c = gamma.clone();
        Ok(Tensor::from_op(
            "layer_norm",
            self.shape().to_vec(),
            out,
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |g| {
                let gm = gamma_c.data();
                let mut gx = vec![0.0; rows * c];
                let mut gg = vec![0.0; c];
                let mut gb = vec![0.0; c];
                for r in 0..rows {
                    let gr = &g[r * c..(r + 1) * c];
                    let hr = &xhat[r * c..(r + 1) * c];
                    let mut mean_d = 0.0;
                    let mut mean_dh = 0.0;
                    for j in 0..c {
                        let d = gr[j] * gm[j];
                        mean_d += d;
                        mean_dh += d * hr[j];
                        gg[j] += gr[j] * hr[j];
                        gb[j] += gr[j];
                    }
                    mean_d /= c as f64;
                    mean_dh /= c as f64;
                    for j in 0..c {
                        let d = gr[j] * gm[j];
                        gx[r * c + j] = inv_std[r] * (d - mean_d - hr[j] * mean_dh);
                    }
                }
                vec![Some(gx), Some(gg), Some(gb)]
            }),
        ))
    }

    /// Picks rows of a `[R, K]` table; gradients scatter-add back into the table.
    pub fn gather_rows(&self, index: &[usize]) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::shape("gather_rows", format!("table must be rank 2, got {:?}", self.shape())));
        }
        let (rows, k) = (self.shape()[0], self.shape()[1]);
        if let Some(bad) = index.iter().find(|&&i| i >= rows) {
            return Err(Error::shape("gather_rows", format!("row {} of {}", bad, rows)));
        }
        let src = self.data();
        let mut out = Vec::with_capacity(index.len() * k);
        for &i in index {
            out.extend_from_slice(&src[i * k..(i + 1) * k]);
        }
        drop(src);
        let idx = index.to_vec();
        Ok(Tensor::from_op(
            "gather_rows",
            vec![index.len(), k],
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gt = vec![0.0; rows * k];
                for (n, &i) in idx.iter().enumerate() {
                    gt[i * k..(i + 1) * k]
                        .iter_mut()
                        .zip(&g[n * k..(n + 1) * k])
                        .for_each(|(a, b)| *a += b);
                }
                vec![Some(gt)]
            }),
        ))
    }

    /// Mean label-smoothed cross-entropy of `[B, K]` logits against class indices.
    pub fn cross_entropy(&self, targets: &[usize], smoothing: f64) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::shape("cross_entropy", format!("logits must be [B, K], got {:?}", self.shape())));
        }
        let (b, k) = (self.shape()[0], self.shape()[1]);
        if targets.len() != b || b == 0 || k == 0 {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} targets for {} rows of {} classes", targets.len(), b, k),
            ));
        }
        if let Some(t) = targets.iter().find(|&&t| t >= k) {
            return Err(Error::Invalid(format!("target class {} out of {}", t, k)));
        }
        if !(0.0..=1.0).contains(&smoothing) {
            return Err(Error::Invalid(format!("label smoothing {} outside [0, 1]", smoothing)));
        }
        let off = smoothing / k as f64;
        let on = 1.0 - smoothing + off;
        let logits = self.data();
        let mut probs = vec![0.0; b * k];
        let mut loss = 0.0;
        for r in 0..b {
            let row = &logits[r * k..(r + 1) * k];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_z = z.ln() + max;
            for j in 0..k {
                let logp = row[j] - log_z;
                probs[r * k + j] = logp.exp();
                let q = if j == targets[r] { on } else { off };
                loss -= q * logp;
            }
        }
        drop(logits);
        let tg = targets.to_vec();
        Ok(Tensor::from_op(
            "cross_entropy",
            Vec::new(),
            vec![loss / b as f64],
            vec![self.clone()],
            Box::new(move |g| {
                let s = g[0] / b as f64;
                let mut gl = probs.clone();
                for r in 0..b {
                    for j in 0..k {
                        let q = if j == tg[r] { on } else { off };
                        gl[r * k + j] = (gl[r * k + j] - q) * s;
                    }
                }
                vec![Some(gl)]
            }),
        ))
    }
}
