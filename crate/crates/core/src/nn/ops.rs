//! Per-sample primitives and their backward rules. Batching is an outer map
//! at the model level; batch normalization is the one primitive that sees
//! the whole batch and lives in its own module.

use super::Tensor;
use crate::{Error, Result};

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match t.shape() {
        [a, b, c] => Ok((*a, *b, *c)),
        s => Err(Error::ShapeMismatch(format!("{what}: expected 3D, got {s:?}"))),
    }
}

/// Stride-1 zero-padded "same" cross-correlation.
/// input [C_in, T, F], weights [C_out, C_in, k_t, k_f] with odd kernel dims,
/// bias [C_out] -> [C_out, T, F].
pub fn conv2d_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (c_in, t_len, f_len) = dims3(input, "conv2d input")?;
    let ws = weights.shape();
    if ws.len() != 4 || ws[1] != c_in {
        return Err(Error::ShapeMismatch(format!(
            "conv2d weights {ws:?} vs input channels {c_in}"
        )));
    }
    let (c_out, k_t, k_f) = (ws[0], ws[2], ws[3]);
    if k_t % 2 == 0 || k_f % 2 == 0 {
        return Err(Error::InvalidConfig(format!(
            "conv2d kernel {k_t}x{k_f} must have odd dimensions"
        )));
    }
    if bias.shape() != [c_out] {
        return Err(Error::ShapeMismatch("conv2d bias".into()));
    }
    let (a_t, a_f) = (k_t / 2, k_f / 2);
    let plane = t_len * f_len;
    let mut out = Tensor::zeros(&[c_out, t_len, f_len]);

    for co in 0..c_out {
        let out_plane = &mut out.data_mut()[co * plane..(co + 1) * plane];
        let b = bias.data()[co];
        for v in out_plane.iter_mut() {
            *v = b;
        }
        for ci in 0..c_in {
            let in_plane = &input.data()[ci * plane..(ci + 1) * plane];
            for i in 0..k_t {
                for k in 0..k_f {
                    let w = weights.data()[((co * c_in + ci) * k_t + i) * k_f + k];
                    if w == 0.0 {
                        continue;
                    }
                    add_shifted(
                        out_plane,
                        in_plane,
                        t_len,
                        f_len,
                        i as isize - a_t as isize,
                        k as isize - a_f as isize,
                        w,
                    );
                }
            }
        }
    }
    Ok(out)
}

/// out[t][f] += w * src[t + dt][f + df] over valid indices.
fn add_shifted(
    out: &mut [f64],
    src: &[f64],
    t_len: usize,
    f_len: usize,
    dt: isize,
    df: isize,
    w: f64,
) {
    let t_lo = (-dt).max(0) as usize;
    let t_hi = (t_len as isize).min(t_len as isize - dt).max(0) as usize;
    let f_lo = (-df).max(0) as usize;
    let f_hi = (f_len as isize).min(f_len as isize - df).max(0) as usize;
    if f_lo >= f_hi {
        return;
    }
    for t in t_lo..t_hi {
        let base = ((t as isize + dt) * f_len as isize + df) as isize;
        let s_lo = (base + f_lo as isize) as usize;
        let s_hi = (base + f_hi as isize) as usize;
        let o = &mut out[t * f_len + f_lo..t * f_len + f_hi];
        let s = &src[s_lo..s_hi];
        for (ov, sv) in o.iter_mut().zip(s) {
            *ov += w * sv;
        }
    }
}

/// Gradients of the same-padded cross-correlation.
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (c_in, t_len, f_len) = dims3(input, "conv2d input")?;
    let ws = weights.shape().to_vec();
    let (c_out, k_t, k_f) = (ws[0], ws[2], ws[3]);
    if upstream.shape() != [c_out, t_len, f_len] {
        return Err(Error::ShapeMismatch("conv2d upstream".into()));
    }
    let (a_t, a_f) = (k_t / 2, k_f / 2);
    let plane = t_len * f_len;

    let mut d_w = Tensor::zeros(&ws);
    let mut d_b = Tensor::zeros(&[c_out]);
    let mut d_in = Tensor::zeros(&[c_in, t_len, f_len]);

    for co in 0..c_out {
        let up_plane = &upstream.data()[co * plane..(co + 1) * plane];
        d_b.data_mut()[co] = up_plane.iter().sum();
        for ci in 0..c_in {
            let in_plane = &input.data()[ci * plane..(ci + 1) * plane];
            for i in 0..k_t {
                for k in 0..k_f {
                    let dt = i as isize - a_t as isize;
                    let df = k as isize - a_f as isize;
                    // dW = sum over (t,f) of up[t][f] * in[t+dt][f+df]
                    let mut acc = 0.0;
                    let t_lo = (-dt).max(0) as usize;
                    let t_hi = (t_len as isize).min(t_len as isize - dt).max(0) as usize;
                    let f_lo = (-df).max(0) as usize;
                    let f_hi = (f_len as isize).min(f_len as isize - df).max(0) as usize;
                    for t in t_lo..t_hi {
                        let up_row = &up_plane[t * f_len + f_lo..t * f_len + f_hi];
                        let base = (t as isize + dt) * f_len as isize + df;
                        let in_row = &in_plane
                            [(base + f_lo as isize) as usize..(base + f_hi as isize) as usize];
                        for (u, x) in up_row.iter().zip(in_row) {
                            acc += u * x;
                        }
                    }
                    let widx = ((co * c_in + ci) * k_t + i) * k_f + k;
                    d_w.data_mut()[widx] += acc;

                    // dIn[t+dt][f+df] += w * up[t][f]
                    let w = weights.data()[widx];
                    if w != 0.0 {
                        let d_in_plane = &mut d_in.data_mut()[ci * plane..(ci + 1) * plane];
                        add_shifted(d_in_plane, up_plane, t_len, f_len, -dt, -df, w);
                    }
                }
            }
        }
    }
    Ok((d_w, d_b, d_in))
}

/// Non-overlapping max pooling; spatial dims floor-divide by the pool size.
/// Returns the pooled tensor and the flat input index of each window max
/// (first max wins on ties) for the backward scatter.
pub fn maxpool2d_forward(input: &Tensor, p_t: usize, p_f: usize) -> Result<(Tensor, Vec<usize>)> {
    let (c, t_len, f_len) = dims3(input, "maxpool input")?;
    if p_t == 0 || p_f == 0 {
        return Err(Error::InvalidConfig("pool dims must be positive".into()));
    }
    if p_t > t_len || p_f > f_len {
        return Err(Error::InvalidConfig(format!(
            "pool {p_t}x{p_f} larger than input {t_len}x{f_len}"
        )));
    }
    let (ot, of) = (t_len / p_t, f_len / p_f);
    let mut out = Tensor::zeros(&[c, ot, of]);
    let mut argmax = vec![0usize; c * ot * of];
    for ci in 0..c {
        for wt in 0..ot {
            for wf in 0..of {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for dt in 0..p_t {
                    for df in 0..p_f {
                        let idx = (ci * t_len + wt * p_t + dt) * f_len + wf * p_f + df;
                        let v = input.data()[idx];
                        if v > best {
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                let oidx = (ci * ot + wt) * of + wf;
                out.data_mut()[oidx] = best;
                argmax[oidx] = best_idx;
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2d_backward(
    input_shape: &[usize],
    argmax: &[usize],
    upstream: &Tensor,
) -> Tensor {
    let mut d_in = Tensor::zeros(input_shape);
    for (o, &src) in argmax.iter().enumerate() {
        d_in.data_mut()[src] += upstream.data()[o];
    }
    d_in
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// d relu: passes upstream where the forward input was strictly positive.
pub fn relu_backward(input: &Tensor, upstream: &Tensor) -> Tensor {
    assert_eq!(input.shape(), upstream.shape());
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &u)| if x > 0.0 { u } else { 0.0 })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(|v| 1.0 / (1.0 + (-v).exp()))
}

/// d sigmoid from the cached forward output y: y (1 - y).
pub fn sigmoid_backward(output: &Tensor, upstream: &Tensor) -> Tensor {
    assert_eq!(output.shape(), upstream.shape());
    let data = output
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&y, &u)| u * y * (1.0 - y))
        .collect();
    Tensor::from_vec(output.shape(), data)
}

/// Affine map applied per row: x [T, D_in], w [D_out, D_in], b [D_out]
/// -> [T, D_out].
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (t_len, d_in) = match x.shape() {
        [t, d] => (*t, *d),
        s => return Err(Error::ShapeMismatch(format!("dense input {s:?}"))),
    };
    let (d_out, wd_in) = (w.shape()[0], w.shape()[1]);
    if wd_in != d_in || b.shape() != [d_out] {
        return Err(Error::ShapeMismatch(format!(
            "dense: x [{t_len}, {d_in}], w {:?}, b {:?}",
            w.shape(),
            b.shape()
        )));
    }
    let mut out = Tensor::zeros(&[t_len, d_out]);
    for t in 0..t_len {
        let xr = &x.data()[t * d_in..(t + 1) * d_in];
        let or = &mut out.data_mut()[t * d_out..(t + 1) * d_out];
        for (o, ov) in or.iter_mut().enumerate() {
            let wr = &w.data()[o * d_in..(o + 1) * d_in];
            let mut acc = b.data()[o];
            for (wv, xv) in wr.iter().zip(xr) {
                acc += wv * xv;
            }
            *ov = acc;
        }
    }
    Ok(out)
}

pub fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (t_len, d_in) = (x.shape()[0], x.shape()[1]);
    let d_out = w.shape()[0];
    if upstream.shape() != [t_len, d_out] {
        return Err(Error::ShapeMismatch("dense upstream".into()));
    }
    let mut d_w = Tensor::zeros(&[d_out, d_in]);
    let mut d_b = Tensor::zeros(&[d_out]);
    let mut d_x = Tensor::zeros(&[t_len, d_in]);
    for t in 0..t_len {
        let xr = &x.data()[t * d_in..(t + 1) * d_in];
        let ur = &upstream.data()[t * d_out..(t + 1) * d_out];
        for (o, &u) in ur.iter().enumerate() {
            d_b.data_mut()[o] += u;
            let wr = &w.data()[o * d_in..(o + 1) * d_in];
            let dwr = &mut d_w.data_mut()[o * d_in..(o + 1) * d_in];
            let dxr = &mut d_x.data_mut()[t * d_in..(t + 1) * d_in];
            for i in 0..d_in {
                dwr[i] += u * xr[i];
                dxr[i] += u * wr[i];
            }
        }
    }
    Ok((d_w, d_b, d_x))
}

/// Join [C_i, T, F] tensors along the channel axis.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    if parts.is_empty() {
        return Err(Error::ShapeMismatch("concat of nothing".into()));
    }
    let (_, t_len, f_len) = dims3(parts[0], "concat input")?;
    let mut total_c = 0;
    for p in parts {
        let (c, t, f) = dims3(p, "concat input")?;
        if (t, f) != (t_len, f_len) {
            return Err(Error::ShapeMismatch(format!(
                "concat: [{c}, {t}, {f}] vs expected spatial [{t_len}, {f_len}]"
            )));
        }
        total_c += c;
    }
    let mut data = Vec::with_capacity(total_c * t_len * f_len);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Ok(Tensor::from_vec(&[total_c, t_len, f_len], data))
}

/// Split a channel-concat gradient back into per-part tensors.
pub fn split_channels(grad: &Tensor, channel_counts: &[usize]) -> Vec<Tensor> {
    let (_, t_len, f_len) = match grad.shape() {
        [c, t, f] => (*c, *t, *f),
        _ => unreachable!("split_channels on non-3D tensor"),
    };
    let plane = t_len * f_len;
    let mut out = Vec::with_capacity(channel_counts.len());
    let mut offset = 0;
    for &c in channel_counts {
        let slice = grad.data()[offset * plane..(offset + c) * plane].to_vec();
        out.push(Tensor::from_vec(&[c, t_len, f_len], slice));
        offset += c;
    }
    out
}

/// Mean squared error over all elements, with its gradient w.r.t. pred.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "mse: pred {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.numel() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(pred.shape());
    for (i, (p, t)) in pred.data().iter().zip(target.data()).enumerate() {
        let d = p - t;
        loss += d * d;
        grad.data_mut()[i] = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}
