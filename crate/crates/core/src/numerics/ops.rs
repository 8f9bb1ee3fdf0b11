//! Forward and backward kernels for the two auditor architectures.
//!
//! Every kernel is a pure function over [`DenseArray`] values. Backward
//! functions take the forward inputs plus the upstream gradient and return
//! fresh gradient arrays; nothing is accumulated in place.

use crate::error::{Error, Result};
use crate::numerics::DenseArray;

/// Gradients of an affine layer.
#[derive(Debug, Clone)]
pub struct AffineGrads {
    pub input: DenseArray,
    pub weights: DenseArray,
    pub bias: DenseArray,
}

/// `out[b,o] = sum_i input[b,i] * weights[i,o] + bias[o]`.
pub fn affine_forward(
    input: &DenseArray,
    weights: &DenseArray,
    bias: &DenseArray,
) -> Result<DenseArray> {
    let (batch, in_dim, out_dim) = affine_shapes(input, weights, bias)?;
    let x = input.data();
    let w = weights.data();
    let mut out = Vec::with_capacity(batch * out_dim);
    for _ in 0..batch {
        out.extend_from_slice(bias.data());
    }
    for b in 0..batch {
        let row = &mut out[b * out_dim..(b + 1) * out_dim];
        for i in 0..in_dim {
            let xi = x[b * in_dim + i];
            if xi == 0.0 {
                continue;
            }
            let w_row = &w[i * out_dim..(i + 1) * out_dim];
            for (o, wv) in row.iter_mut().zip(w_row) {
                *o += xi * wv;
            }
        }
    }
    DenseArray::new(vec![batch, out_dim], out)
}

pub fn affine_backward(
    input: &DenseArray,
    weights: &DenseArray,
    grad_out: &DenseArray,
) -> Result<AffineGrads> {
    input.expect_rank(2, "affine_backward")?;
    weights.expect_rank(2, "affine_backward")?;
    let (batch, in_dim) = (input.dims()[0], input.dims()[1]);
    let out_dim = weights.dims()[1];
    if weights.dims()[0] != in_dim {
        return Err(Error::dims("affine_backward", input.dims(), weights.dims()));
    }
    if grad_out.dims() != [batch, out_dim] {
        return Err(Error::dims(
            "affine_backward",
            grad_out.dims(),
            &[batch, out_dim],
        ));
    }
    let x = input.data();
    let w = weights.data();
    let g = grad_out.data();

    let mut grad_in = vec![0.0; batch * in_dim];
    let mut grad_w = vec![0.0; in_dim * out_dim];
    let mut grad_b = vec![0.0; out_dim];
    for b in 0..batch {
        let g_row = &g[b * out_dim..(b + 1) * out_dim];
        for (gb, gv) in grad_b.iter_mut().zip(g_row) {
            *gb += gv;
        }
        for i in 0..in_dim {
            let w_row = &w[i * out_dim..(i + 1) * out_dim];
            grad_in[b * in_dim + i] = w_row.iter().zip(g_row).map(|(a, c)| a * c).sum();
            let xi = x[b * in_dim + i];
            if xi != 0.0 {
                let gw_row = &mut grad_w[i * out_dim..(i + 1) * out_dim];
                for (gw, gv) in gw_row.iter_mut().zip(g_row) {
                    *gw += xi * gv;
                }
            }
        }
    }
    Ok(AffineGrads {
        input: DenseArray::new(vec![batch, in_dim], grad_in)?,
        weights: DenseArray::new(vec![in_dim, out_dim], grad_w)?,
        bias: DenseArray::new(vec![out_dim], grad_b)?,
    })
}

fn affine_shapes(
    input: &DenseArray,
    weights: &DenseArray,
    bias: &DenseArray,
) -> Result<(usize, usize, usize)> {
    if input.dims().len() != 2 || weights.dims().len() != 2 || input.dims()[1] != weights.dims()[0]
    {
        return Err(Error::dims("affine", input.dims(), weights.dims()));
    }
    let out_dim = weights.dims()[1];
    if bias.dims() != [out_dim] {
        return Err(Error::dims("affine bias", bias.dims(), &[out_dim]));
    }
    Ok((input.dims()[0], input.dims()[1], out_dim))
}

pub fn relu_forward(input: &DenseArray) -> DenseArray {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|x| *x = x.max(0.0));
    out
}

/// Passes `grad_out` where the forward input was positive. The kink at
/// exactly zero takes the zero subgradient.
pub fn relu_backward(input: &DenseArray, grad_out: &DenseArray) -> Result<DenseArray> {
    if !input.same_shape(grad_out) {
        return Err(Error::dims("relu_backward", input.dims(), grad_out.dims()));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    DenseArray::new(input.dims().to_vec(), data)
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: DenseArray,
    pub kernels: DenseArray,
    pub bias: DenseArray,
}

#[derive(Clone, Copy)]
struct ConvShape {
    batch: usize,
    c_in: usize,
    c_out: usize,
    rows: usize,
    cols: usize,
}

fn conv_shape(input: &DenseArray, kernels: &DenseArray) -> Result<ConvShape> {
    input.expect_rank(4, "conv3x3 input")?;
    kernels.expect_rank(4, "conv3x3 kernels")?;
    let id = input.dims();
    let kd = kernels.dims();
    if kd[1] != id[1] || kd[2] != 3 || kd[3] != 3 {
        return Err(Error::dims("conv3x3", id, kd));
    }
    Ok(ConvShape {
        batch: id[0],
        c_in: id[1],
        c_out: kd[0],
        rows: id[2],
        cols: id[3],
    })
}

/// 3x3 convolution, stride 1, zero padding 1 on both spatial axes.
///
/// Layout: input `[B, C_in, L, D]`, kernels `[C_out, C_in, 3, 3]`,
/// output `[B, C_out, L, D]`. This is cross-correlation, as in every deep
/// learning framework.
pub fn conv3x3_forward(
    input: &DenseArray,
    kernels: &DenseArray,
    bias: &DenseArray,
) -> Result<DenseArray> {
    let s = conv_shape(input, kernels)?;
    if bias.dims() != [s.c_out] {
        return Err(Error::dims("conv3x3 bias", bias.dims(), &[s.c_out]));
    }
    let plane = s.rows * s.cols;
    let x = input.data();
    let k = kernels.data();
    let mut out = vec![0.0; s.batch * s.c_out * plane];
    for b in 0..s.batch {
        for co in 0..s.c_out {
            let out_plane = &mut out[(b * s.c_out + co) * plane..][..plane];
            out_plane.iter_mut().for_each(|v| *v = bias.data()[co]);
            for ci in 0..s.c_in {
                let in_plane = &x[(b * s.c_in + ci) * plane..][..plane];
                let kern = &k[(co * s.c_in + ci) * 9..][..9];
                for (ki, &kv) in kern.iter().enumerate() {
                    if kv == 0.0 {
                        continue;
                    }
                    let (dr, dc) = (ki / 3, ki % 3);
                    accumulate_shifted(out_plane, in_plane, s.rows, s.cols, dr, dc, kv);
                }
            }
        }
    }
    DenseArray::new(vec![s.batch, s.c_out, s.rows, s.cols], out)
}

/// `out[r,c] += weight * src[r+dr-1, c+dc-1]` over the in-bounds region.
#[inline]
fn accumulate_shifted(
    out: &mut [f64],
    src: &[f64],
    rows: usize,
    cols: usize,
    dr: usize,
    dc: usize,
    weight: f64,
) {
    let (r0, r1) = valid_range(rows, dr);
    let (c0, c1) = valid_range(cols, dc);
    for r in r0..r1 {
        let sr = r + dr - 1;
        let o = &mut out[r * cols + c0..r * cols + c1];
        let s = &src[sr * cols + c0 + dc - 1..sr * cols + c1 + dc - 1];
        for (ov, sv) in o.iter_mut().zip(s) {
            *ov += weight * sv;
        }
    }
}

/// Output positions `p` for which `p + offset - 1` lies in `0..extent`.
#[inline]
fn valid_range(extent: usize, offset: usize) -> (usize, usize) {
    match offset {
        0 => (1.min(extent), extent),
        1 => (0, extent),
        _ => (0, extent.saturating_sub(1)),
    }
}

pub fn conv3x3_backward(
    input: &DenseArray,
    kernels: &DenseArray,
    grad_out: &DenseArray,
) -> Result<ConvGrads> {
    let s = conv_shape(input, kernels)?;
    if grad_out.dims() != [s.batch, s.c_out, s.rows, s.cols] {
        return Err(Error::dims(
            "conv3x3_backward",
            grad_out.dims(),
            &[s.batch, s.c_out, s.rows, s.cols],
        ));
    }
    let plane = s.rows * s.cols;
    let x = input.data();
    let k = kernels.data();
    let g = grad_out.data();
    let mut grad_in = vec![0.0; x.len()];
    let mut grad_k = vec![0.0; k.len()];
    let mut grad_b = vec![0.0; s.c_out];

    for b in 0..s.batch {
        for co in 0..s.c_out {
            let g_plane = &g[(b * s.c_out + co) * plane..][..plane];
            grad_b[co] += g_plane.iter().sum::<f64>();
            for ci in 0..s.c_in {
                let in_plane = &x[(b * s.c_in + ci) * plane..][..plane];
                let gi_plane = &mut grad_in[(b * s.c_in + ci) * plane..][..plane];
                let kbase = (co * s.c_in + ci) * 9;
                for ki in 0..9 {
                    let (dr, dc) = (ki / 3, ki % 3);
                    let (r0, r1) = valid_range(s.rows, dr);
                    let (c0, c1) = valid_range(s.cols, dc);
                    let kv = k[kbase + ki];
                    let mut acc = 0.0;
                    for r in r0..r1 {
                        let sr = r + dr - 1;
                        let go = &g_plane[r * s.cols + c0..r * s.cols + c1];
                        let src = &in_plane[sr * s.cols + c0 + dc - 1..sr * s.cols + c1 + dc - 1];
                        let dst =
                            &mut gi_plane[sr * s.cols + c0 + dc - 1..sr * s.cols + c1 + dc - 1];
                        for ((gv, sv), dv) in go.iter().zip(src).zip(dst.iter_mut()) {
                            acc += gv * sv;
                            *dv += kv * gv;
                        }
                    }
                    grad_k[kbase + ki] += acc;
                }
            }
        }
    }
    Ok(ConvGrads {
        input: DenseArray::new(input.dims().to_vec(), grad_in)?,
        kernels: DenseArray::new(kernels.dims().to_vec(), grad_k)?,
        bias: DenseArray::new(vec![s.c_out], grad_b)?,
    })
}

/// Global average over the two spatial axes: `[B, C, L, D] -> [B, C]`.
pub fn adaptive_avg_pool_forward(input: &DenseArray) -> Result<DenseArray> {
    input.expect_rank(4, "adaptive_avg_pool")?;
    let d = input.dims();
    let (batch, channels, plane) = (d[0], d[1], d[2] * d[3]);
    let out = input
        .data()
        .chunks_exact(plane)
        .map(|p| p.iter().sum::<f64>() / plane as f64)
        .collect();
    DenseArray::new(vec![batch, channels], out)
}

pub fn adaptive_avg_pool_backward(input_dims: &[usize], grad_out: &DenseArray) -> Result<DenseArray> {
    if input_dims.len() != 4 || grad_out.dims() != [input_dims[0], input_dims[1]] {
        return Err(Error::dims("adaptive_avg_pool_backward", input_dims, grad_out.dims()));
    }
    let plane = input_dims[2] * input_dims[3];
    let scale = 1.0 / plane as f64;
    let data = grad_out
        .data()
        .iter()
        .flat_map(|&g| std::iter::repeat_n(g * scale, plane))
        .collect();
    DenseArray::new(input_dims.to_vec(), data)
}
