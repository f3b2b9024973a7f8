//! Raw numeric kernels over flat buffers. No graph bookkeeping here.

use super::strides;

/// `c = a·b + beta·c` with `a` logically m×k and `b` logically k×n, each
/// optionally stored transposed. All buffers are row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides above address exactly the m×k, k×n and m×n
    // regions whose lengths are checked by the debug assertion.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Copies (or adds) an axis-aligned box of extent `extent` from `src` at
/// `src_origin` into `dst` at `dst_origin`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn copy_box(
    src: &[f64],
    src_shape: &[usize],
    src_origin: &[usize],
    dst: &mut [f64],
    dst_shape: &[usize],
    dst_origin: &[usize],
    extent: &[usize],
    accumulate: bool,
) {
    let rank = extent.len();
    debug_assert!(src_shape.len() == rank && dst_shape.len() == rank);
    if extent.contains(&0) {
        return;
    }
    if rank == 0 {
        if accumulate {
            dst[0] += src[0];
        } else {
            dst[0] = src[0];
        }
        return;
    }
    let ss = strides(src_shape);
    let ds = strides(dst_shape);
    let inner = extent[rank - 1];
    let outer: usize = extent[..rank - 1].iter().product();
    let mut idx = vec![0usize; rank - 1];
    for _ in 0..outer {
        let mut so = src_origin[rank - 1];
        let mut d_off = dst_origin[rank - 1];
        for ax in 0..rank - 1 {
            so += (src_origin[ax] + idx[ax]) * ss[ax];
            d_off += (dst_origin[ax] + idx[ax]) * ds[ax];
        }
        let s = &src[so..so + inner];
        let d = &mut dst[d_off..d_off + inner];
        if accumulate {
            d.iter_mut().zip(s).for_each(|(a, b)| *a += b);
        } else {
            d.copy_from_slice(s);
        }
        for ax in (0..rank - 1).rev() {
            idx[ax] += 1;
            if idx[ax] < extent[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}

/// Gathers `src` into a new buffer laid out as `src` permuted by `axes`.
pub(crate) fn permute_data(src: &[f64], shape: &[usize], axes: &[usize]) -> Vec<f64> {
    let rank = shape.len();
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let gather: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let total = src.len();
    let mut out = Vec::with_capacity(total);
    if total == 0 {
        return out;
    }
    if rank == 0 {
        out.push(src[0]);
        return out;
    }
    let mut idx = vec![0usize; rank];
    let mut offset = 0usize;
    for _ in 0..total {
        out.push(src[offset]);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            offset += gather[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            offset -= gather[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    out
}
