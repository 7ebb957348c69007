//! Gated recurrent unit: single-direction scan with full backpropagation
//! through time, plus the bidirectional composition.
//!
//! Gate layout stacks (reset, update, candidate) in that order:
//!   r_t = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//!   z_t = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//!   n_t = tanh(W_in x + b_in + r_t * (W_hn h + b_hn))
//!   h_t = (1 - z_t) * n_t + z_t * h_{t-1}
//! with h_0 = 0.

use super::Tensor;
use crate::{Error, Result};

/// Parameters of one direction: w_ih [3H, D], w_hh [3H, H], b_ih [3H],
/// b_hh [3H].
#[derive(Debug, Clone)]
pub struct GruParams {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub b_ih: Tensor,
    pub b_hh: Tensor,
    pub hidden: usize,
    pub input_dim: usize,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> GruParams {
        GruParams {
            w_ih: Tensor::zeros(&[3 * hidden, input_dim]),
            w_hh: Tensor::zeros(&[3 * hidden, hidden]),
            b_ih: Tensor::zeros(&[3 * hidden]),
            b_hh: Tensor::zeros(&[3 * hidden]),
            hidden,
            input_dim,
        }
    }
}

/// Everything the backward pass needs, per timestep.
#[derive(Debug, Clone)]
pub struct GruCache {
    t_len: usize,
    r: Vec<f64>,      // [T, H]
    z: Vec<f64>,      // [T, H]
    n: Vec<f64>,      // [T, H]
    hn_pre: Vec<f64>, // [T, H]  W_hn h + b_hn
    h_prev: Vec<f64>, // [T, H]  hidden state entering step t
}

/// Accumulated parameter gradients of one direction.
#[derive(Debug, Clone)]
pub struct GruGrads {
    pub d_w_ih: Tensor,
    pub d_w_hh: Tensor,
    pub d_b_ih: Tensor,
    pub d_b_hh: Tensor,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// mat [R, C] times vec [C] -> into out [R] (accumulating).
fn matvec_acc(mat: &[f64], rows: usize, cols: usize, vec: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &mat[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (m, v) in row.iter().zip(vec) {
            acc += m * v;
        }
        out[r] += acc;
    }
}

/// mat^T times vec: out[c] += sum_r mat[r, c] * vec[r].
fn matvec_t_acc(mat: &[f64], rows: usize, cols: usize, vec: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &mat[r * cols..(r + 1) * cols];
        let v = vec[r];
        if v == 0.0 {
            continue;
        }
        for (o, m) in out.iter_mut().zip(row) {
            *o += v * m;
        }
    }
}

/// Run the scan over x [T, D]; returns hidden states [T, H] and the cache.
pub fn gru_forward(params: &GruParams, x: &Tensor) -> Result<(Tensor, GruCache)> {
    let (t_len, d) = match x.shape() {
        [t, d] => (*t, *d),
        s => return Err(Error::ShapeMismatch(format!("gru input {s:?}"))),
    };
    if d != params.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "gru input dim {d} vs params {}",
            params.input_dim
        )));
    }
    let h = params.hidden;
    let mut hs = Tensor::zeros(&[t_len, h]);
    let mut cache = GruCache {
        t_len,
        r: vec![0.0; t_len * h],
        z: vec![0.0; t_len * h],
        n: vec![0.0; t_len * h],
        hn_pre: vec![0.0; t_len * h],
        h_prev: vec![0.0; t_len * h],
    };

    let mut h_state = vec![0.0; h];
    let mut gates_i = vec![0.0; 3 * h];
    let mut gates_h = vec![0.0; 3 * h];
    for t in 0..t_len {
        let xr = &x.data()[t * d..(t + 1) * d];
        gates_i.copy_from_slice(params.b_ih.data());
        matvec_acc(params.w_ih.data(), 3 * h, d, xr, &mut gates_i);
        gates_h.copy_from_slice(params.b_hh.data());
        matvec_acc(params.w_hh.data(), 3 * h, h, &h_state, &mut gates_h);

        cache.h_prev[t * h..(t + 1) * h].copy_from_slice(&h_state);
        for j in 0..h {
            let r = sigmoid(gates_i[j] + gates_h[j]);
            let z = sigmoid(gates_i[h + j] + gates_h[h + j]);
            let hn_pre = gates_h[2 * h + j];
            let n = (gates_i[2 * h + j] + r * hn_pre).tanh();
            let h_new = (1.0 - z) * n + z * h_state[j];
            cache.r[t * h + j] = r;
            cache.z[t * h + j] = z;
            cache.n[t * h + j] = n;
            cache.hn_pre[t * h + j] = hn_pre;
            hs.data_mut()[t * h + j] = h_new;
        }
        h_state.copy_from_slice(&hs.data()[t * h..(t + 1) * h]);
    }
    Ok((hs, cache))
}

/// Backpropagation through time. `upstream` is [T, H]; returns the gradient
/// of the inputs [T, D] and accumulates parameter gradients into `grads`.
pub fn gru_backward(
    params: &GruParams,
    x: &Tensor,
    cache: &GruCache,
    upstream: &Tensor,
    grads: &mut GruGrads,
) -> Result<Tensor> {
    let (t_len, d, h) = (cache.t_len, params.input_dim, params.hidden);
    if upstream.shape() != [t_len, h] {
        return Err(Error::ShapeMismatch("gru upstream".into()));
    }
    let mut d_x = Tensor::zeros(&[t_len, d]);
    let mut d_h = vec![0.0; h];
    let mut dr_pre = vec![0.0; h];
    let mut dz_pre = vec![0.0; h];
    let mut dn_pre_i = vec![0.0; h]; // gradient at W_in x + b_in
    let mut dhn_pre = vec![0.0; h]; // gradient at W_hn h + b_hn

    for t in (0..t_len).rev() {
        let base = t * h;
        for j in 0..h {
            let dht = upstream.data()[base + j] + d_h[j];
            let r = cache.r[base + j];
            let z = cache.z[base + j];
            let n = cache.n[base + j];
            let hn_pre = cache.hn_pre[base + j];
            let h_prev = cache.h_prev[base + j];

            let dz = dht * (h_prev - n);
            let dn = dht * (1.0 - z);
            let dn_raw = dn * (1.0 - n * n);
            let dr = dn_raw * hn_pre;

            dn_pre_i[j] = dn_raw;
            dhn_pre[j] = dn_raw * r;
            dz_pre[j] = dz * z * (1.0 - z);
            dr_pre[j] = dr * r * (1.0 - r);
            // direct path into the previous hidden state
            d_h[j] = dht * z;
        }

        let xr = &x.data()[t * d..(t + 1) * d];
        let h_prev_row = &cache.h_prev[base..base + h];
        // accumulate parameter gradients: rows [0,h) reset, [h,2h) update,
        // [2h,3h) candidate
        for (g_off, dpre) in [(0usize, &dr_pre), (h, &dz_pre), (2 * h, &dn_pre_i)] {
            for j in 0..h {
                let gv = dpre[j];
                if gv == 0.0 {
                    continue;
                }
                let wrow = &mut grads.d_w_ih.data_mut()[(g_off + j) * d..(g_off + j + 1) * d];
                for (wv, xv) in wrow.iter_mut().zip(xr) {
                    *wv += gv * xv;
                }
                grads.d_b_ih.data_mut()[g_off + j] += gv;
            }
        }
        for (g_off, dpre) in [(0usize, &dr_pre), (h, &dz_pre), (2 * h, &dhn_pre)] {
            for j in 0..h {
                let gv = dpre[j];
                if gv == 0.0 {
                    continue;
                }
                let wrow = &mut grads.d_w_hh.data_mut()[(g_off + j) * h..(g_off + j + 1) * h];
                for (wv, hv) in wrow.iter_mut().zip(h_prev_row) {
                    *wv += gv * hv;
                }
                grads.d_b_hh.data_mut()[g_off + j] += gv;
            }
        }

        // input gradient
        let dxr = &mut d_x.data_mut()[t * d..(t + 1) * d];
        matvec_t_acc(&params.w_ih.data()[..h * d], h, d, &dr_pre, dxr);
        matvec_t_acc(&params.w_ih.data()[h * d..2 * h * d], h, d, &dz_pre, dxr);
        matvec_t_acc(&params.w_ih.data()[2 * h * d..], h, d, &dn_pre_i, dxr);

        // recurrent gradient into h_{t-1}
        matvec_t_acc(&params.w_hh.data()[..h * h], h, h, &dr_pre, &mut d_h);
        matvec_t_acc(&params.w_hh.data()[h * h..2 * h * h], h, h, &dz_pre, &mut d_h);
        matvec_t_acc(&params.w_hh.data()[2 * h * h..], h, h, &dhn_pre, &mut d_h);
    }
    Ok(d_x)
}

/// Forward + reversed scans concatenated per step: out [T, 2H].
pub fn bigru_forward(
    fwd: &GruParams,
    bwd: &GruParams,
    x: &Tensor,
) -> Result<(Tensor, GruCache, GruCache, Tensor)> {
    let (t_len, _) = (x.shape()[0], x.shape()[1]);
    let h = fwd.hidden;
    let (hs_f, cache_f) = gru_forward(fwd, x)?;
    let x_rev = reverse_time(x);
    let (hs_b_rev, cache_b) = gru_forward(bwd, &x_rev)?;
    let mut out = Tensor::zeros(&[t_len, 2 * h]);
    for t in 0..t_len {
        out.data_mut()[t * 2 * h..t * 2 * h + h].copy_from_slice(&hs_f.data()[t * h..(t + 1) * h]);
        let src = (t_len - 1 - t) * h;
        out.data_mut()[t * 2 * h + h..(t + 1) * 2 * h]
            .copy_from_slice(&hs_b_rev.data()[src..src + h]);
    }
    Ok((out, cache_f, cache_b, x_rev))
}

#[allow(clippy::too_many_arguments)]
pub fn bigru_backward(
    fwd: &GruParams,
    bwd: &GruParams,
    x: &Tensor,
    x_rev: &Tensor,
    cache_f: &GruCache,
    cache_b: &GruCache,
    upstream: &Tensor,
    grads_f: &mut GruGrads,
    grads_b: &mut GruGrads,
) -> Result<Tensor> {
    let t_len = x.shape()[0];
    let h = fwd.hidden;
    if upstream.shape() != [t_len, 2 * h] {
        return Err(Error::ShapeMismatch("bigru upstream".into()));
    }
    let mut up_f = Tensor::zeros(&[t_len, h]);
    let mut up_b = Tensor::zeros(&[t_len, h]);
    for t in 0..t_len {
        up_f.data_mut()[t * h..(t + 1) * h]
            .copy_from_slice(&upstream.data()[t * 2 * h..t * 2 * h + h]);
        let dst = (t_len - 1 - t) * h;
        up_b.data_mut()[dst..dst + h]
            .copy_from_slice(&upstream.data()[t * 2 * h + h..(t + 1) * 2 * h]);
    }
    let d_x_f = gru_backward(fwd, x, cache_f, &up_f, grads_f)?;
    let d_x_b_rev = gru_backward(bwd, x_rev, cache_b, &up_b, grads_b)?;
    let mut d_x = d_x_f;
    let d_rev = reverse_time(&d_x_b_rev);
    d_x.add_assign(&d_rev);
    Ok(d_x)
}

pub fn reverse_time(x: &Tensor) -> Tensor {
    let (t_len, d) = (x.shape()[0], x.shape()[1]);
    let mut out = Tensor::zeros(&[t_len, d]);
    for t in 0..t_len {
        out.data_mut()[t * d..(t + 1) * d]
            .copy_from_slice(&x.data()[(t_len - 1 - t) * d..(t_len - t) * d]);
    }
    out
}
