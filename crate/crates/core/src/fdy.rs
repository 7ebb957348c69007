//! Frequency-dynamic convolution: per-frequency-bin attention mixes a basis
//! of kernels, so the effective kernel varies along frequency and the layer
//! gives up translational equivariance on that axis.
//!
//! Attention path: mean over time -> per-bin two-layer map (shared across
//! bins) -> temperature softmax over the basis. The per-bin map is pointwise
//! so frequency dependence comes from the data, not the bin index.

use crate::nn::ops::{conv2d_backward, conv2d_forward};
use crate::nn::{init, Tensor};
use crate::rng::Rng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdyConfig {
    /// Basis kernel count K.
    pub n_basis: usize,
    /// Attention hidden width; None picks max(C_in / 4, 4).
    pub hidden: Option<usize>,
    /// Softmax temperature (logits are divided by it).
    pub temperature: f64,
}

impl Default for FdyConfig {
    fn default() -> Self {
        FdyConfig {
            n_basis: 4,
            hidden: None,
            temperature: 1.0,
        }
    }
}

impl FdyConfig {
    pub fn hidden_for(&self, c_in: usize) -> usize {
        self.hidden.unwrap_or((c_in / 4).max(4))
    }
}

#[derive(Debug, Clone)]
pub struct FdyLayer {
    /// [K, C_out, C_in, k_t, k_f], odd kernel dims.
    pub basis: Tensor,
    /// [C_out].
    pub bias: Tensor,
    /// [hidden, C_in].
    pub attn_w1: Tensor,
    /// [hidden].
    pub attn_b1: Tensor,
    /// [K, hidden].
    pub attn_w2: Tensor,
    /// [K].
    pub attn_b2: Tensor,
    pub temperature: f64,
}

#[derive(Debug, Clone)]
pub struct FdyGrads {
    pub d_basis: Tensor,
    pub d_bias: Tensor,
    pub d_attn_w1: Tensor,
    pub d_attn_b1: Tensor,
    pub d_attn_w2: Tensor,
    pub d_attn_b2: Tensor,
    pub d_input: Tensor,
}

struct AttnCache {
    pooled: Tensor,  // [C_in, F]
    h_pre: Tensor,   // [F, hidden]
    h: Tensor,       // [F, hidden]
    weights: Tensor, // [F, K]
}

impl FdyLayer {
    pub fn new(
        c_in: usize,
        c_out: usize,
        k_t: usize,
        k_f: usize,
        cfg: &FdyConfig,
        rng: &mut Rng,
    ) -> Result<FdyLayer> {
        if cfg.n_basis == 0 {
            return Err(Error::InvalidConfig("fdy needs at least one basis kernel".into()));
        }
        if !(cfg.temperature > 0.0) {
            return Err(Error::InvalidConfig("fdy temperature must be positive".into()));
        }
        if k_t % 2 == 0 || k_f % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "fdy kernel {k_t}x{k_f} must have odd dimensions"
            )));
        }
        let hidden = cfg.hidden_for(c_in);
        let fan_in = c_in * k_t * k_f;
        Ok(FdyLayer {
            basis: init::uniform_fan_in(&[cfg.n_basis, c_out, c_in, k_t, k_f], fan_in, rng),
            bias: init::uniform_fan_in(&[c_out], fan_in, rng),
            attn_w1: init::uniform_fan_in(&[hidden, c_in], c_in, rng),
            attn_b1: init::uniform_fan_in(&[hidden], c_in, rng),
            attn_w2: init::uniform_fan_in(&[cfg.n_basis, hidden], hidden, rng),
            attn_b2: init::uniform_fan_in(&[cfg.n_basis], hidden, rng),
            temperature: cfg.temperature,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.basis.shape()[0]
    }

    pub fn c_out(&self) -> usize {
        self.basis.shape()[1]
    }

    pub fn c_in(&self) -> usize {
        self.basis.shape()[2]
    }

    fn basis_kernel(&self, k: usize) -> Tensor {
        let s = self.basis.shape();
        let kernel_len = s[1] * s[2] * s[3] * s[4];
        Tensor::from_vec(
            &[s[1], s[2], s[3], s[4]],
            self.basis.data()[k * kernel_len..(k + 1) * kernel_len].to_vec(),
        )
    }

    fn attention_with_cache(&self, input: &Tensor) -> Result<AttnCache> {
        let (c_in, t_len, f_len) = match input.shape() {
            [c, t, f] => (*c, *t, *f),
            s => return Err(Error::ShapeMismatch(format!("fdy input {s:?}"))),
        };
        if c_in != self.c_in() {
            return Err(Error::ShapeMismatch(format!(
                "fdy input channels {c_in} vs layer {}",
                self.c_in()
            )));
        }
        if t_len == 0 || f_len == 0 {
            return Err(Error::ShapeMismatch("empty fdy input".into()));
        }
        let hidden = self.attn_w1.shape()[0];
        let k = self.n_basis();

        let mut pooled = Tensor::zeros(&[c_in, f_len]);
        for c in 0..c_in {
            for t in 0..t_len {
                let row = &input.data()[(c * t_len + t) * f_len..(c * t_len + t + 1) * f_len];
                let dst = &mut pooled.data_mut()[c * f_len..(c + 1) * f_len];
                for (d, v) in dst.iter_mut().zip(row) {
                    *d += v;
                }
            }
        }
        pooled.scale(1.0 / t_len as f64);

        let mut h_pre = Tensor::zeros(&[f_len, hidden]);
        let mut h = Tensor::zeros(&[f_len, hidden]);
        let mut weights = Tensor::zeros(&[f_len, k]);
        for f in 0..f_len {
            for j in 0..hidden {
                let mut acc = self.attn_b1.data()[j];
                for c in 0..c_in {
                    acc += self.attn_w1.at2(j, c) * pooled.at2(c, f);
                }
                let idx = h_pre.ix2(f, j);
                h_pre.data_mut()[idx] = acc;
                h.data_mut()[idx] = acc.max(0.0);
            }
            let mut logits = vec![0.0; k];
            for (ki, l) in logits.iter_mut().enumerate() {
                let mut acc = self.attn_b2.data()[ki];
                for j in 0..hidden {
                    acc += self.attn_w2.at2(ki, j) * h.at2(f, j);
                }
                *l = acc / self.temperature;
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for l in &mut logits {
                *l = (*l - max).exp();
                denom += *l;
            }
            for (ki, l) in logits.iter().enumerate() {
                let idx = weights.ix2(f, ki);
                weights.data_mut()[idx] = l / denom;
            }
        }
        Ok(AttnCache {
            pooled,
            h_pre,
            h,
            weights,
        })
    }
}

/// Per-bin simplex weights [F, K] from time-pooled input.
pub fn fdy_attention(input: &Tensor, layer: &FdyLayer) -> Result<Tensor> {
    Ok(layer.attention_with_cache(input)?.weights)
}

/// Forward pass: output column f is the same-padded convolution with the
/// attention-mixed kernel for bin f. Computed as K static convolutions
/// combined per bin (linearity of convolution in the kernel), which matches
/// the per-bin reference loop to rounding.
pub fn fdy_forward(input: &Tensor, layer: &FdyLayer) -> Result<Tensor> {
    let cache = layer.attention_with_cache(input)?;
    let (out, _) = forward_with_cache(input, layer, &cache)?;
    Ok(out)
}

/// Apply the layer with an externally fixed attention map [F, K]. This pins
/// the per-bin kernels, which is how the layer's frequency shift-variance is
/// demonstrated: the fixed operator applies a different kernel at every bin,
/// so it cannot commute with frequency translation. (When the attention is
/// recomputed from the input, the pointwise per-bin map shifts along with a
/// circularly shifted input, which restores interior commutation.)
pub fn fdy_forward_with_weights(
    input: &Tensor,
    layer: &FdyLayer,
    weights: &Tensor,
) -> Result<Tensor> {
    let f_len = match input.shape() {
        [_, _, f] => *f,
        s => return Err(Error::ShapeMismatch(format!("fdy input {s:?}"))),
    };
    if weights.shape() != [f_len, layer.n_basis()] {
        return Err(Error::ShapeMismatch(format!(
            "fdy weights {:?} vs [{f_len}, {}]",
            weights.shape(),
            layer.n_basis()
        )));
    }
    let cache = AttnCache {
        pooled: Tensor::zeros(&[layer.c_in(), f_len]),
        h_pre: Tensor::zeros(&[f_len, 1]),
        h: Tensor::zeros(&[f_len, 1]),
        weights: weights.clone(),
    };
    let (out, _) = forward_with_cache(input, layer, &cache)?;
    Ok(out)
}

fn forward_with_cache(
    input: &Tensor,
    layer: &FdyLayer,
    attn: &AttnCache,
) -> Result<(Tensor, Vec<Tensor>)> {
    let (t_len, f_len) = (input.shape()[1], input.shape()[2]);
    let c_out = layer.c_out();
    let k = layer.n_basis();
    let zero_bias = Tensor::zeros(&[c_out]);
    let mut convs = Vec::with_capacity(k);
    for ki in 0..k {
        convs.push(conv2d_forward(input, &layer.basis_kernel(ki), &zero_bias)?);
    }
    let mut out = Tensor::zeros(&[c_out, t_len, f_len]);
    for co in 0..c_out {
        let b = layer.bias.data()[co];
        for t in 0..t_len {
            let base = (co * t_len + t) * f_len;
            let row = &mut out.data_mut()[base..base + f_len];
            for v in row.iter_mut() {
                *v = b;
            }
            for (ki, conv) in convs.iter().enumerate() {
                let crow = &conv.data()[base..base + f_len];
                for (f, rv) in row.iter_mut().enumerate() {
                    *rv += attn.weights.at2(f, ki) * crow[f];
                }
            }
        }
    }
    Ok((out, convs))
}

/// Exact reverse-mode gradients of `fdy_forward` for every parameter group,
/// the input included (both the convolution path and the attention path).
pub fn fdy_backward(upstream: &Tensor, input: &Tensor, layer: &FdyLayer) -> Result<FdyGrads> {
    let cache = layer.attention_with_cache(input)?;
    let (_, convs) = forward_with_cache(input, layer, &cache)?;
    let (c_in, t_len, f_len) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let c_out = layer.c_out();
    let k = layer.n_basis();
    let hidden = layer.attn_w1.shape()[0];
    if upstream.shape() != [c_out, t_len, f_len] {
        return Err(Error::ShapeMismatch(format!(
            "fdy upstream {:?} vs [{c_out}, {t_len}, {f_len}]",
            upstream.shape()
        )));
    }

    let mut d_basis = Tensor::zeros(layer.basis.shape());
    let mut d_bias = Tensor::zeros(&[c_out]);
    let mut d_input = Tensor::zeros(&[c_in, t_len, f_len]);
    let mut d_weights = Tensor::zeros(&[f_len, k]); // dL/d attention weights

    for co in 0..c_out {
        let mut acc = 0.0;
        for t in 0..t_len {
            let base = (co * t_len + t) * f_len;
            acc += upstream.data()[base..base + f_len].iter().sum::<f64>();
        }
        d_bias.data_mut()[co] = acc;
    }

    let kernel_len: usize = layer.basis.shape()[1..].iter().product();
    for (ki, conv) in convs.iter().enumerate() {
        // weighted upstream for this basis kernel
        let mut up_k = Tensor::zeros(&[c_out, t_len, f_len]);
        for co in 0..c_out {
            for t in 0..t_len {
                let base = (co * t_len + t) * f_len;
                for f in 0..f_len {
                    up_k.data_mut()[base + f] =
                        upstream.data()[base + f] * cache.weights.at2(f, ki);
                }
            }
        }
        let (dw, _, din) = conv2d_backward(input, &layer.basis_kernel(ki), &up_k)?;
        d_basis.data_mut()[ki * kernel_len..(ki + 1) * kernel_len].copy_from_slice(dw.data());
        d_input.add_assign(&din);

        // dL/dw[f, ki] = sum over (co, t) of upstream * conv_k
        for co in 0..c_out {
            for t in 0..t_len {
                let base = (co * t_len + t) * f_len;
                for f in 0..f_len {
                    d_weights.data_mut()[f * k + ki] +=
                        upstream.data()[base + f] * conv.data()[base + f];
                }
            }
        }
    }

    // softmax backward per bin, then the two-layer attention map
    let mut d_attn_w1 = Tensor::zeros(layer.attn_w1.shape());
    let mut d_attn_b1 = Tensor::zeros(layer.attn_b1.shape());
    let mut d_attn_w2 = Tensor::zeros(layer.attn_w2.shape());
    let mut d_attn_b2 = Tensor::zeros(layer.attn_b2.shape());
    let mut d_pooled = Tensor::zeros(&[c_in, f_len]);
    for f in 0..f_len {
        let w_row = &cache.weights.data()[f * k..(f + 1) * k];
        let dw_row = &d_weights.data()[f * k..(f + 1) * k];
        let dot: f64 = w_row.iter().zip(dw_row).map(|(a, b)| a * b).sum();
        let dlogits: Vec<f64> = w_row
            .iter()
            .zip(dw_row)
            .map(|(w, dw)| w * (dw - dot) / layer.temperature)
            .collect();

        let mut dh = vec![0.0; hidden];
        for (ki, &dl) in dlogits.iter().enumerate() {
            d_attn_b2.data_mut()[ki] += dl;
            for j in 0..hidden {
                d_attn_w2.data_mut()[ki * hidden + j] += dl * cache.h.at2(f, j);
                dh[j] += dl * layer.attn_w2.at2(ki, j);
            }
        }
        for j in 0..hidden {
            let dh_pre = if cache.h_pre.at2(f, j) > 0.0 { dh[j] } else { 0.0 };
            if dh_pre == 0.0 {
                continue;
            }
            d_attn_b1.data_mut()[j] += dh_pre;
            for c in 0..c_in {
                d_attn_w1.data_mut()[j * c_in + c] += dh_pre * cache.pooled.at2(c, f);
                d_pooled.data_mut()[c * f_len + f] += dh_pre * layer.attn_w1.at2(j, c);
            }
        }
    }
    // pooling backward: mean over time
    let inv_t = 1.0 / t_len as f64;
    for c in 0..c_in {
        for t in 0..t_len {
            let base = (c * t_len + t) * f_len;
            for f in 0..f_len {
                d_input.data_mut()[base + f] += d_pooled.at2(c, f) * inv_t;
            }
        }
    }

    Ok(FdyGrads {
        d_basis,
        d_bias,
        d_attn_w1,
        d_attn_b1,
        d_attn_w2,
        d_attn_b2,
        d_input,
    })
}
