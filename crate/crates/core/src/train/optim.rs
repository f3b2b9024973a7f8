use std::f64::consts::PI;

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::tensor::Parameter;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl From<&TrainConfig> for AdamHyper {
    fn from(c: &TrainConfig) -> Self {
        AdamHyper { beta1: c.beta1, beta2: c.beta2, eps: c.eps }
    }
}

/// Learning rate for `step`: linear from 0 over the warm-up, then a half cosine down to 0 at `total_steps`.
pub fn lr_at(step: usize, cfg: &TrainConfig) -> f64 {
    let (warm, total) = (cfg.warmup_steps, cfg.total_steps);
    if step < warm {
        return cfg.lr * step as f64 / warm as f64;
    }
    if total <= warm {
        return cfg.lr;
    }
    let tau = (step.min(total) - warm) as f64 / (total - warm) as f64;
    cfg.lr * 0.5 * (1.0 + (PI * tau).cos())
}

/// One AdamW update of a flat parameter at step `t` (1-based): shrink by
/// `1 - lr·decay`, then subtract the bias-corrected Adam step.
#[allow(clippy::too_many_arguments)]
pub fn adamw_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: usize,
    lr: f64,
    decay: f64,
    hp: &AdamHyper,
) -> Result<()> {
    let n = param.len();
    if grad.len() != n || m.len() != n || v.len() != n {
        return Err(Error::shape(
            "adamw",
            format!("param {n}, grad {}, m {}, v {}", grad.len(), m.len(), v.len()),
        ));
    }
    if t == 0 {
        return Err(Error::Invalid("adamw step counter starts at 1".into()));
    }
    let c1 = 1.0 - hp.beta1.powi(t as i32);
    let c2 = 1.0 - hp.beta2.powi(t as i32);
    for i in 0..n {
        let g = grad[i];
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        param[i] *= 1.0 - lr * decay;
        param[i] -= lr * m_hat / (v_hat.sqrt() + hp.eps);
    }
    Ok(())
}

/// First and second moments for a fixed list of parameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub t: usize,
    pub hyper: AdamHyper,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[&Parameter], hyper: AdamHyper) -> Self {
        AdamState {
            t: 0,
            hyper,
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
        }
    }

    /// Applies the accumulated gradients (missing ones count as zero). Decay
    /// only touches parameters flagged for it.
    pub fn step(&mut self, params: &[&Parameter], lr: f64, weight_decay: f64) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::shape("adamw", format!("{} params, state for {}", params.len(), self.m.len())));
        }
        self.t += 1;
        for (i, p) in params.iter().enumerate() {
            let grad = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
            let decay = if p.decays() { weight_decay } else { 0.0 };
            let mut data = p.tensor().data_mut();
            adamw_update(&mut data, &grad, &mut self.m[i], &mut self.v[i], self.t, lr, decay, &self.hyper)?;
        }
        Ok(())
    }
}
