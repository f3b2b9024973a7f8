use super::grid::{WindowGrid, WindowGroup};
use super::params::SguParams;
use crate::error::{Error, Result};
use crate::tensor::kernels::gemm;
use crate::tensor::Tensor;

/// Tokens of all windows of one group, `[B·windows, gh·gw, C]`, batch-major.
#[derive(Clone, Debug)]
pub struct WindowBatch {
    pub group: usize,
    pub shape: (usize, usize),
    pub offset: (usize, usize),
    pub tokens: Tensor,
}

fn feature_dims(op: &'static str, x: &Tensor) -> Result<(usize, usize, usize, usize)> {
    match *x.shape() {
        [b, h, w, c] => Ok((b, h, w, c)),
        _ => Err(Error::shape(op, format!("expected [B, H, W, C], got {:?}", x.shape()))),
    }
}

fn check_grid(op: &'static str, h: usize, w: usize, grid: &WindowGrid) -> Result<()> {
    if grid.image() != (h, w) {
        return Err(Error::shape(op, format!("grid built for {:?}, map is {:?}", grid.image(), (h, w))));
    }
    Ok(())
}

/// Splits a feature map into per-group window token batches. Pure data movement.
pub fn window_partition(x: &Tensor, grid: &WindowGrid) -> Result<Vec<WindowBatch>> {
    let (b, h, w, c) = feature_dims("window_partition", x)?;
    check_grid("window_partition", h, w, grid)?;
    let src = x.data();
    let mut out = Vec::with_capacity(grid.groups().len());
    for (gi, g) in grid.groups().iter().enumerate() {
        let (gh, gw) = g.shape;
        let mut buf = Vec::with_capacity(b * g.len() * gh * gw * c);
        for bi in 0..b {
            for &(r0, c0) in &g.origins {
                for r in r0..r0 + gh {
                    let base = ((bi * h + r) * w + c0) * c;
                    buf.extend_from_slice(&src[base..base + gw * c]);
                }
            }
        }
        out.push(WindowBatch {
            group: gi,
            shape: g.shape,
            offset: g.offset,
            tokens: Tensor::new(&[b * g.len(), gh * gw, c], buf)?,
        });
    }
    Ok(out)
}

/// Inverse of [`window_partition`].
pub fn window_reverse(batches: &[WindowBatch], grid: &WindowGrid, batch: usize) -> Result<Tensor> {
    if batches.len() != grid.groups().len() {
        return Err(Error::shape(
            "window_reverse",
            format!("{} batches for {} groups", batches.len(), grid.groups().len()),
        ));
    }
    let (h, w) = grid.image();
    let c = batches.first().map_or(0, |wb| wb.tokens.shape()[2]);
    let mut out = vec![0.0; batch * h * w * c];
    for (wb, g) in batches.iter().zip(grid.groups()) {
        let (gh, gw) = g.shape;
        if wb.tokens.shape() != [batch * g.len(), gh * gw, c] {
            return Err(Error::shape(
                "window_reverse",
                format!("group {} tokens {:?}", wb.group, wb.tokens.shape()),
            ));
        }
        let src = wb.tokens.data();
        let mut cursor = 0;
        for bi in 0..batch {
            for &(r0, c0) in &g.origins {
                for r in r0..r0 + gh {
                    let base = ((bi * h + r) * w + c0) * c;
                    out[base..base + gw * c].copy_from_slice(&src[cursor..cursor + gw * c]);
                    cursor += gw * c;
                }
            }
        }
    }
    Tensor::new(&[batch, h, w, c], out)
}

/// Copies one window's channels `[ch0, ch0 + K·d)` into a head-major `[K][tokens][d]` buffer.
#[allow(clippy::too_many_arguments)]
fn gather_heads(
    src: &[f64],
    dims: (usize, usize, usize),
    bi: usize,
    origin: (usize, usize),
    shape: (usize, usize),
    ch0: usize,
    heads: usize,
    d: usize,
    buf: &mut [f64],
) {
    let (h, w, c) = dims;
    let n = shape.0 * shape.1;
    for x in 0..shape.0 {
        for y in 0..shape.1 {
            let p = x * shape.1 + y;
            let base = ((bi * h + origin.0 + x) * w + origin.1 + y) * c + ch0;
            for k in 0..heads {
                buf[(k * n + p) * d..(k * n + p + 1) * d].copy_from_slice(&src[base + k * d..base + (k + 1) * d]);
            }
        }
    }
}

/// Inverse of [`gather_heads`], adding into `dst`.
#[allow(clippy::too_many_arguments)]
fn scatter_heads_add(
    buf: &[f64],
    dims: (usize, usize, usize),
    bi: usize,
    origin: (usize, usize),
    shape: (usize, usize),
    ch0: usize,
    heads: usize,
    d: usize,
    dst: &mut [f64],
) {
    let (h, w, c) = dims;
    let n = shape.0 * shape.1;
    for x in 0..shape.0 {
        for y in 0..shape.1 {
            let p = x * shape.1 + y;
            let base = ((bi * h + origin.0 + x) * w + origin.1 + y) * c + ch0;
            for k in 0..heads {
                dst[base + k * d..base + (k + 1) * d]
                    .iter_mut()
                    .zip(&buf[(k * n + p) * d..(k * n + p + 1) * d])
                    .for_each(|(a, b)| *a += b);
            }
        }
    }
}

/// Flat center-window token index of local token `p` of a group.
fn center_token(g: &WindowGroup, window_cols: usize, p: usize) -> usize {
    let (x, y) = g.center_index(p / g.shape.1, p % g.shape.1);
    x * window_cols + y
}

/// Per-head `[m×m]` sub-weights and `[m]` sub-biases of a group, copied from the center window.
fn group_weights(g: &WindowGroup, window_cols: usize, n: usize, heads: usize, w: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = g.tokens_per_window();
    let idx: Vec<usize> = (0..m).map(|p| center_token(g, window_cols, p)).collect();
    let mut ws = vec![0.0; heads * m * m];
    let mut bs = vec![0.0; heads * m];
    for k in 0..heads {
        for (p, &pc) in idx.iter().enumerate() {
            bs[k * m + p] = b[pc * heads + k];
            for (q, &qc) in idx.iter().enumerate() {
                ws[(k * m + p) * m + q] = w[(pc * n + qc) * heads + k];
            }
        }
    }
    (ws, bs)
}

/// Multi-head window spatial gating over a `[B, H, W, 2C]` map.
///
/// For every group of `grid`, every window and every head `k`:
/// `Y = Z1 ⊙ (W_g Z2 + b_g)`, where `W_g`/`b_g` are the rows and columns
/// of the center-window `weight[.., .., k]` / `bias[.., k]` selected by the
/// group's offset. Channels `[0, C)` are `Z1`, `[C, 2C)` are `Z2`; head `k`
/// owns channels `[k·C/K, (k+1)·C/K)` of each half.
pub fn window_sgu(x: &Tensor, weight: &Tensor, bias: &Tensor, grid: &WindowGrid, heads: usize) -> Result<Tensor> {
    let (bsz, h, w, c2) = feature_dims("window_sgu", x)?;
    check_grid("window_sgu", h, w, grid)?;
    if c2 % 2 != 0 {
        return Err(Error::shape("window_sgu", format!("odd channel extent {c2}")));
    }
    let c = c2 / 2;
    if heads == 0 || c % heads != 0 {
        return Err(Error::Invalid(format!("{heads} heads do not divide {c} gate channels")));
    }
    let (wh, ww) = grid.window();
    let n = wh * ww;
    if weight.shape() != [n, n, heads] || bias.shape() != [n, heads] {
        return Err(Error::shape(
            "window_sgu",
            format!(
                "window {:?} with {heads} heads needs weight [{n}, {n}, {heads}] and bias [{n}, {heads}], got {:?} / {:?}",
                grid.window(),
                weight.shape(),
                bias.shape()
            ),
        ));
    }
    let d = c / heads;
    let dims = (h, w, c2);
    let mut out = vec![0.0; bsz * h * w * c];
    // gate value per output element, kept for the backward pass
    let mut gate = vec![0.0; bsz * h * w * c];
    {
        let xs = x.data();
        let (wd, bd) = (weight.data(), bias.data());
        for g in grid.groups() {
            let m = g.tokens_per_window();
            let (ws, bs) = group_weights(g, ww, n, heads, &wd, &bd);
            let mut z2 = vec![0.0; heads * m * d];
            let mut mixed = vec![0.0; m * d];
            for bi in 0..bsz {
                for &origin in &g.origins {
                    gather_heads(&xs, dims, bi, origin, g.shape, c, heads, d, &mut z2);
                    for k in 0..heads {
                        gemm(m, m, d, &ws[k * m * m..(k + 1) * m * m], false, &z2[k * m * d..(k + 1) * m * d], false, &mut mixed, 0.0);
                        for p in 0..m {
                            let (px, py) = (p / g.shape.1, p % g.shape.1);
                            let pix = (bi * h + origin.0 + px) * w + origin.1 + py;
                            let bval = bs[k * m + p];
                            for j in 0..d {
                                let gv = mixed[p * d + j] + bval;
                                let ch = k * d + j;
                                gate[pix * c + ch] = gv;
                                out[pix * c + ch] = xs[pix * c2 + ch] * gv;
                            }
                        }
                    }
                }
            }
        }
    }
    let (xc, wc, grid_c) = (x.clone(), weight.clone(), grid.clone());
    let (x_tr, w_tr, b_tr) = (x.is_tracked(), weight.is_tracked(), bias.is_tracked());
    Ok(Tensor::from_op(
        "window_sgu",
        vec![bsz, h, w, c],
        out,
        vec![x.clone(), weight.clone(), bias.clone()],
        Box::new(move |gout| {
            let xs = xc.data();
            let wd = wc.data();
            let mut gx = vec![0.0; bsz * h * w * c2];
            let mut gw = vec![0.0; n * n * heads];
            let mut gb = vec![0.0; n * heads];
            // d(out)/d(gate) = z1, d(out)/d(z1) = gate
            let mut dgate_map = vec![0.0; bsz * h * w * c];
            for pix in 0..bsz * h * w {
                for ch in 0..c {
                    let go = gout[pix * c + ch];
                    gx[pix * c2 + ch] = go * gate[pix * c + ch];
                    dgate_map[pix * c + ch] = go * xs[pix * c2 + ch];
                }
            }
            let dgate_dims = (h, w, c);
            let zero_b = vec![0.0; n * heads];
            for g in grid_c.groups() {
                let m = g.tokens_per_window();
                let idx: Vec<usize> = (0..m).map(|p| center_token(g, ww, p)).collect();
                let (ws, _) = group_weights(g, ww, n, heads, &wd, &zero_b);
                let mut z2 = vec![0.0; heads * m * d];
                let mut dg = vec![0.0; heads * m * d];
                let mut dz2 = vec![0.0; heads * m * d];
                let mut dws = vec![0.0; heads * m * m];
                for bi in 0..bsz {
                    for &origin in &g.origins {
                        gather_heads(&dgate_map, dgate_dims, bi, origin, g.shape, 0, heads, d, &mut dg);
                        if w_tr {
                            gather_heads(&xs, dims, bi, origin, g.shape, c, heads, d, &mut z2);
                        }
                        for k in 0..heads {
                            let dgk = &dg[k * m * d..(k + 1) * m * d];
                            if b_tr {
                                for p in 0..m {
                                    gb[idx[p] * heads + k] += dgk[p * d..(p + 1) * d].iter().sum::<f64>();
                                }
                            }
                            if w_tr {
                                // dW_g += dG · Z2ᵀ
                                gemm(m, d, m, dgk, false, &z2[k * m * d..(k + 1) * m * d], true, &mut dws[k * m * m..(k + 1) * m * m], 1.0);
                            }
                            if x_tr {
                                // dZ2 = W_gᵀ · dG
                                gemm(m, m, d, &ws[k * m * m..(k + 1) * m * m], true, dgk, false, &mut dz2[k * m * d..(k + 1) * m * d], 0.0);
                            }
                        }
                        if x_tr {
                            scatter_heads_add(&dz2, dims, bi, origin, g.shape, c, heads, d, &mut gx);
                        }
                    }
                }
                if w_tr {
                    for k in 0..heads {
                        for (p, &pc) in idx.iter().enumerate() {
                            for (q, &qc) in idx.iter().enumerate() {
                                gw[(pc * n + qc) * heads + k] += dws[(k * m + p) * m + q];
                            }
                        }
                    }
                }
            }
            vec![x_tr.then_some(gx), w_tr.then_some(gw), b_tr.then_some(gb)]
        }),
    ))
}

/// Multi-head window SGU with the effective weight `W' + W_rel` of `params`.
pub fn multi_head_window_sgu(x: &Tensor, params: &SguParams, grid: &WindowGrid) -> Result<Tensor> {
    if grid.window() != params.window() {
        return Err(Error::shape(
            "multi_head_window_sgu",
            format!("grid window {:?}, parameters sized for {:?}", grid.window(), params.window()),
        ));
    }
    let weight = params.effective_weight()?;
    window_sgu(x, &weight, params.b_win.tensor(), grid, params.heads())
}

/// Single-head SGU over a whole token sequence `z: [N, 2C]` with `N = hw`,
/// built from generic graph ops: `z1 ⊙ (W z2 + b)`.
pub fn sgu(z: &Tensor, params: &SguParams) -> Result<Tensor> {
    if params.heads() != 1 {
        return Err(Error::Invalid(format!("sgu takes one head, got {}", params.heads())));
    }
    let (n, c2) = match *z.shape() {
        [n, c2] => (n, c2),
        _ => return Err(Error::shape("sgu", format!("expected [N, 2C], got {:?}", z.shape()))),
    };
    if c2 % 2 != 0 {
        return Err(Error::shape("sgu", format!("odd channel extent {c2}")));
    }
    if n != params.tokens() {
        return Err(Error::shape("sgu", format!("{n} tokens for a {:?} window", params.window())));
    }
    let c = c2 / 2;
    let z1 = z.narrow(1, 0..c)?;
    let z2 = z.narrow(1, c..c2)?;
    let w = params.effective_weight()?.reshape(&[n, n])?;
    let b = params.b_win.tensor().reshape(&[n, 1])?;
    let bias = b.matmul(&Tensor::full(&[1, c], 1.0))?;
    z1.mul(&w.matmul(&z2)?.add(&bias)?)
}
