use super::grid::WindowGrid;
use super::kernel::{window_partition, window_reverse};
use super::params::SguParams;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Reference for the shifted window SGU: zero-pad the map so the shifted
/// lattice becomes a uniform tiling of full windows, evaluate the full
/// center-window SGU on each window term by term, then crop the padding off.
///
/// Zero tokens in `Z2` add nothing to `W Z2`, and the surviving rows read the
/// same weight and bias entries as the padding-free group slices, so both
/// paths must agree.
pub fn zero_padding_shift_oracle(x: &Tensor, params: &SguParams, grid: &WindowGrid) -> Result<Tensor> {
    let (bsz, hh, ww, c2) = match *x.shape() {
        [b, h, w, c] => (b, h, w, c),
        _ => return Err(Error::shape("zero_padding_shift_oracle", format!("expected [B, H, W, C], got {:?}", x.shape()))),
    };
    if grid.image() != (hh, ww) || grid.window() != params.window() {
        return Err(Error::shape("zero_padding_shift_oracle", "grid does not match map or parameters"));
    }
    if c2 % 2 != 0 {
        return Err(Error::shape("zero_padding_shift_oracle", format!("odd channel extent {c2}")));
    }
    let c = c2 / 2;
    let heads = params.heads();
    if c % heads != 0 {
        return Err(Error::Invalid(format!("{heads} heads do not divide {c} gate channels")));
    }
    let d = c / heads;
    let (h, w) = params.window();
    let n = h * w;
    let (oy, ox) = grid.origin();
    let ph = (hh + oy).div_ceil(h) * h;
    let pw = (ww + ox).div_ceil(w) * w;
    let padded = x.detach().pad(&[(0, 0), (oy, ph - hh - oy), (ox, pw - ww - ox), (0, 0)])?;
    let uniform = WindowGrid::unshifted((ph, pw), (h, w))?;

    let weight = params.effective_weight()?.to_vec();
    let bias = params.b_win.tensor().to_vec();
    let mut results = Vec::new();
    for batch in window_partition(&padded, &uniform)? {
        let windows = batch.tokens.shape()[0];
        let z = batch.tokens.data();
        let mut y = vec![0.0; windows * n * c];
        for win in 0..windows {
            let tok = |p: usize, ch: usize| z[(win * n + p) * c2 + ch];
            for p in 0..n {
                for ch in 0..c {
                    let k = ch / d;
                    let mut acc = bias[p * heads + k];
                    for q in 0..n {
                        acc += weight[(p * n + q) * heads + k] * tok(q, c + ch);
                    }
                    y[(win * n + p) * c + ch] = tok(p, ch) * acc;
                }
            }
        }
        drop(z);
        results.push(super::kernel::WindowBatch {
            tokens: Tensor::new(&[windows, n, c], y)?,
            ..batch
        });
    }
    let full = window_reverse(&results, &uniform, bsz)?;
    full.slice(&[0..bsz, oy..oy + hh, ox..ox + ww, 0..c])
}
