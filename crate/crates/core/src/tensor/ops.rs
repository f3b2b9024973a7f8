use std::ops::Range;

use super::kernels::{copy_box, gemm, permute_data};
use super::{numel, Tensor};
use crate::error::{Error, Result};

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("add", self, other)?;
        let data = self.data().iter().zip(other.data().iter()).map(|(a, b)| a + b).collect();
        Ok(Tensor::from_op(
            "add",
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|g| vec![Some(g.to_vec()), Some(g.to_vec())]),
        ))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("sub", self, other)?;
        let data = self.data().iter().zip(other.data().iter()).map(|(a, b)| a - b).collect();
        Ok(Tensor::from_op(
            "sub",
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(|g| vec![Some(g.to_vec()), Some(g.iter().map(|v| -v).collect())]),
        ))
    }

    /// Element-wise (Hadamard) product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("mul", self, other)?;
        let data = self.data().iter().zip(other.data().iter()).map(|(a, b)| a * b).collect();
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            "mul",
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let ga = a.is_tracked().then(|| g.iter().zip(b.data().iter()).map(|(g, b)| g * b).collect());
                let gb = b.is_tracked().then(|| g.iter().zip(a.data().iter()).map(|(g, a)| g * a).collect());
                vec![ga, gb]
            }),
        ))
    }

    pub fn scale(&self, s: f64) -> Tensor {
        let data = self.data().iter().map(|v| v * s).collect();
        Tensor::from_op(
            "scale",
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g| vec![Some(g.iter().map(|v| v * s).collect())]),
        )
    }

    /// Adds `bias` (shape `[C]`) along the last axis.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor> {
        let c = *self.shape().last().unwrap_or(&0);
        if bias.shape() != [c] {
            return Err(Error::shape(
                "add_bias",
                format!("bias {:?} for input {:?}", bias.shape(), self.shape()),
            ));
        }
        let b = bias.data();
        let mut data = self.to_vec();
        for row in data.chunks_mut(c.max(1)) {
            row.iter_mut().zip(b.iter()).for_each(|(x, b)| *x += b);
        }
        drop(b);
        Ok(Tensor::from_op(
            "add_bias",
            self.shape().to_vec(),
            data,
            vec![self.clone(), bias.clone()],
            Box::new(move |g| {
                let mut gb = vec![0.0; c];
                for row in g.chunks(c.max(1)) {
                    gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                vec![Some(g.to_vec()), Some(gb)]
            }),
        ))
    }

    /// Multiplies the `i`-th slice along axis 0 by `factors[i]`. The factors are constants.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Tensor> {
        let lead = self.shape().first().copied().unwrap_or(0);
        if factors.len() != lead {
            return Err(Error::shape(
                "scale_rows",
                format!("{} factors for leading extent {}", factors.len(), lead),
            ));
        }
        let per = self.numel().checked_div(lead).unwrap_or(0);
        let apply = move |src: &[f64], factors: &[f64]| -> Vec<f64> {
            let mut out = src.to_vec();
            if per > 0 {
                for (row, f) in out.chunks_mut(per).zip(factors) {
                    row.iter_mut().for_each(|v| *v *= f);
                }
            }
            out
        };
        let data = apply(&self.data(), factors);
        let factors = factors.to_vec();
        Ok(Tensor::from_op(
            "scale_rows",
            self.shape().to_vec(),
            data,
            vec![self.clone()],
            Box::new(move |g| vec![Some(apply(g, &factors))]),
        ))
    }

    /// Sum of all entries as a rank-0 tensor.
    pub fn sum(&self) -> Tensor {
        let s = self.data().iter().sum();
        let n = self.numel();
        Tensor::from_op(
            "sum",
            Vec::new(),
            vec![s],
            vec![self.clone()],
            Box::new(move |g| vec![Some(vec![g[0]; n])]),
        )
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    /// Mean over one axis; the axis is removed from the shape.
    pub fn mean_axis(&self, axis: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return Err(Error::shape("mean_axis", format!("axis {} of {:?}", axis, shape)));
        }
        let outer: usize = shape[..axis].iter().product();
        let len = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        if len == 0 {
            return Err(Error::shape("mean_axis", "empty reduction axis"));
        }
        let inv = 1.0 / len as f64;
        let src = self.data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let s = &src[(o * len + l) * inner..(o * len + l + 1) * inner];
                out[o * inner..(o + 1) * inner].iter_mut().zip(s).for_each(|(a, b)| *a += b);
            }
        }
        out.iter_mut().for_each(|v| *v *= inv);
        drop(src);
        let mut out_shape = shape.clone();
        out_shape.remove(axis);
        Ok(Tensor::from_op(
            "mean_axis",
            out_shape,
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    for l in 0..len {
                        gx[(o * len + l) * inner..(o * len + l + 1) * inner]
                            .iter_mut()
                            .zip(&g[o * inner..(o + 1) * inner])
                            .for_each(|(a, b)| *a = b * inv);
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// 2-D matrix product.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (sa, sb) = (self.shape(), other.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape(
                "matmul",
                format!("cannot multiply {:?} by {:?}", sa, sb),
            ));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.data(), false, &other.data(), false, &mut out, 0.0);
        let (a, b) = (self.clone(), other.clone());
        Ok(Tensor::from_op(
            "matmul",
            vec![m, n],
            out,
            vec![self.clone(), other.clone()],
            Box::new(move |g| {
                let ga = a.is_tracked().then(|| {
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g, false, &b.data(), true, &mut ga, 0.0);
                    ga
                });
                let gb = b.is_tracked().then(|| {
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, &a.data(), true, g, false, &mut gb, 0.0);
                    gb
                });
                vec![ga, gb]
            }),
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {:?}", self.shape(), shape),
            ));
        }
        Ok(Tensor::from_op(
            "reshape",
            shape.to_vec(),
            self.to_vec(),
            vec![self.clone()],
            Box::new(|g| vec![Some(g.to_vec())]),
        ))
    }

    /// Reorders axes so that output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::shape(
                "permute",
                format!("{:?} is not a permutation of {} axes", axes, rank),
            ));
        }
        let shape = self.shape().to_vec();
        let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
        let data = permute_data(&self.data(), &shape, axes);
        let mut inverse = vec![0; rank];
        for (i, &a) in axes.iter().enumerate() {
            inverse[a] = i;
        }
        let out_shape_b = out_shape.clone();
        Ok(Tensor::from_op(
            "permute",
            out_shape,
            data,
            vec![self.clone()],
            Box::new(move |g| vec![Some(permute_data(g, &out_shape_b, &inverse))]),
        ))
    }

    /// Sub-box with one half-open range per axis.
    pub fn slice(&self, ranges: &[Range<usize>]) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if ranges.len() != shape.len() || ranges.iter().zip(&shape).any(|(r, &s)| r.start > r.end || r.end > s) {
            return Err(Error::shape(
                "slice",
                format!("ranges {:?} out of bounds for {:?}", ranges, shape),
            ));
        }
        let origin: Vec<usize> = ranges.iter().map(|r| r.start).collect();
        let extent: Vec<usize> = ranges.iter().map(|r| r.end - r.start).collect();
        let zero = vec![0; shape.len()];
        let mut out = vec![0.0; numel(&extent)];
        copy_box(&self.data(), &shape, &origin, &mut out, &extent, &zero, &extent, false);
        let ext_b = extent.clone();
        Ok(Tensor::from_op(
            "slice",
            extent,
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; numel(&shape)];
                copy_box(g, &ext_b, &zero, &mut gx, &shape, &origin, &ext_b, false);
                vec![Some(gx)]
            }),
        ))
    }

    /// Slice along a single axis.
    pub fn narrow(&self, axis: usize, range: Range<usize>) -> Result<Tensor> {
        if axis >= self.rank() {
            return Err(Error::shape("narrow", format!("axis {} of {:?}", axis, self.shape())));
        }
        let ranges: Vec<Range<usize>> = self
            .shape()
            .iter()
            .enumerate()
            .map(|(i, &s)| if i == axis { range.clone() } else { 0..s })
            .collect();
        self.slice(&ranges)
    }

    /// Zero padding with `(before, after)` per axis.
    pub fn pad(&self, pads: &[(usize, usize)]) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if pads.len() != shape.len() {
            return Err(Error::shape("pad", format!("{} pads for rank {}", pads.len(), shape.len())));
        }
        let out_shape: Vec<usize> = shape.iter().zip(pads).map(|(s, (b, a))| s + b + a).collect();
        let origin: Vec<usize> = pads.iter().map(|p| p.0).collect();
        let zero = vec![0; shape.len()];
        let mut out = vec![0.0; numel(&out_shape)];
        copy_box(&self.data(), &shape, &zero, &mut out, &out_shape, &origin, &shape, false);
        let out_shape_b = out_shape.clone();
        Ok(Tensor::from_op(
            "pad",
            out_shape,
            out,
            vec![self.clone()],
            Box::new(move |g| {
                let mut gx = vec![0.0; numel(&shape)];
                copy_box(g, &out_shape_b, &origin, &mut gx, &shape, &zero, &shape, false);
                vec![Some(gx)]
            }),
        ))
    }

    /// Joins tensors along `axis`; all other extents must agree.
    pub fn concat(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| Error::shape("concat", "no inputs"))?;
        let rank = first.rank();
        if axis >= rank {
            return Err(Error::shape("concat", format!("axis {} of rank {}", axis, rank)));
        }
        for p in parts {
            let ok = p.rank() == rank
                && p.shape().iter().zip(first.shape()).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(Error::shape(
                    "concat",
                    format!("{:?} vs {:?} along axis {}", p.shape(), first.shape(), axis),
                ));
            }
        }
        let mut out_shape = first.shape().to_vec();
        out_shape[axis] = parts.iter().map(|p| p.shape()[axis]).sum();
        let mut out = vec![0.0; numel(&out_shape)];
        let zero = vec![0; rank];
        let mut offsets = Vec::with_capacity(parts.len());
        let mut cursor = 0;
        for p in parts {
            let mut origin = zero.clone();
            origin[axis] = cursor;
            copy_box(&p.data(), p.shape(), &zero, &mut out, &out_shape, &origin, p.shape(), false);
            offsets.push((origin, p.shape().to_vec()));
            cursor += p.shape()[axis];
        }
        let out_shape_b = out_shape.clone();
        Ok(Tensor::from_op(
            "concat",
            out_shape,
            out,
            parts.to_vec(),
            Box::new(move |g| {
                offsets
                    .iter()
                    .map(|(origin, shape)| {
                        let mut gp = vec![0.0; numel(shape)];
                        copy_box(g, &out_shape_b, origin, &mut gp, shape, &zero, shape, false);
                        Some(gp)
                    })
                    .collect()
            }),
        ))
    }
}
