use rand::Rng;
use serde::{Deserialize, Serialize};

use super::relbias::{materialize_relative_bias, relative_table_len};
use crate::error::{Error, Result};
use crate::tensor::{Parameter, Tensor};

/// Starting values for the spatial mixing weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SguInit {
    /// `W' ~ U(-1e-3/n, 1e-3/n)`, `b = 1`, zero relative table.
    #[default]
    NearIdentity,
    /// `W' = 0`, `b = 1`, zero relative table: the gate passes `Z1` through unchanged.
    Identity,
}

/// Per-head spatial weights of a window SGU, sized for the full (center) window.
#[derive(Clone, Debug)]
pub struct SguParams {
    /// `[hw, hw, K]`
    pub w_win: Parameter,
    /// `[hw, K]`
    pub b_win: Parameter,
    /// `[(2h-1)(2w-1), K]`
    pub rel_table: Option<Parameter>,
    window: (usize, usize),
    heads: usize,
}

impl SguParams {
    pub fn init(
        prefix: &str,
        window: (usize, usize),
        heads: usize,
        relative_bias: bool,
        init: SguInit,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let n = window.0 * window.1;
        let w = match init {
            SguInit::Identity => Tensor::zeros(&[n, n, heads]),
            SguInit::NearIdentity => {
                let bound = 1e-3 / n as f64;
                Tensor::from_fn(&[n, n, heads], |_| rng.gen_range(-bound..bound))
            }
        };
        let b = Tensor::full(&[n, heads], 1.0);
        let rel = relative_bias.then(|| Tensor::zeros(&[relative_table_len(window), heads]));
        Self::from_tensors(prefix, w, b, rel, window, heads)
    }

    pub fn from_tensors(
        prefix: &str,
        w_win: Tensor,
        b_win: Tensor,
        rel_table: Option<Tensor>,
        window: (usize, usize),
        heads: usize,
    ) -> Result<Self> {
        let n = window.0 * window.1;
        if heads == 0 || n == 0 {
            return Err(Error::Invalid(format!("SGU needs heads > 0 and a non-empty window, got {heads} / {window:?}")));
        }
        if w_win.shape() != [n, n, heads] {
            return Err(Error::shape("SguParams", format!("w_win {:?}, want [{n}, {n}, {heads}]", w_win.shape())));
        }
        if b_win.shape() != [n, heads] {
            return Err(Error::shape("SguParams", format!("b_win {:?}, want [{n}, {heads}]", b_win.shape())));
        }
        if let Some(t) = &rel_table {
            let rows = relative_table_len(window);
            if t.shape() != [rows, heads] {
                return Err(Error::shape("SguParams", format!("rel_table {:?}, want [{rows}, {heads}]", t.shape())));
            }
        }
        Ok(SguParams {
            w_win: Parameter::new(format!("{prefix}.w_win"), w_win, true),
            b_win: Parameter::new(format!("{prefix}.b_win"), b_win, false),
            rel_table: rel_table.map(|t| Parameter::new(format!("{prefix}.rel_table"), t, false)),
            window,
            heads,
        })
    }

    pub fn window(&self) -> (usize, usize) {
        self.window
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn tokens(&self) -> usize {
        self.window.0 * self.window.1
    }

    /// `W = W' + W_rel` as a graph node, `[hw, hw, K]`.
    pub fn effective_weight(&self) -> Result<Tensor> {
        match &self.rel_table {
            None => Ok(self.w_win.tensor().clone()),
            Some(t) => {
                let rel = materialize_relative_bias(t.tensor(), self.window)?;
                self.w_win.tensor().add(&rel)
            }
        }
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut v = vec![&self.w_win, &self.b_win];
        v.extend(self.rel_table.as_ref());
        v
    }

    /// Parameter scalars: `K·hw·(hw + 1)`, plus `K·(2h-1)(2w-1)` with a relative table.
    pub fn param_count(window: (usize, usize), heads: usize, relative_bias: bool) -> usize {
        let n = window.0 * window.1;
        let rel = if relative_bias { relative_table_len(window) } else { 0 };
        heads * (n * (n + 1) + rel)
    }
}
