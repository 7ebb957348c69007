//! Per-channel batch normalization over [C, T, F] samples.
//!
//! Training mode normalizes with statistics over the whole batch and all
//! spatial positions, then updates running statistics with momentum 0.1
//! (running <- 0.9 running + 0.1 batch). Running variance stores the
//! unbiased estimate; normalization uses the biased one, eps = 1e-5.

use super::Tensor;
use crate::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct BnCache {
    pub xhat: Vec<Tensor>,
    pub inv_std: Vec<f64>,
    pub count: usize,
}

/// Training-mode forward over a batch; updates `running_mean`/`running_var`.
pub fn bn_forward_train(
    xs: &[Tensor],
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &mut [f64],
    running_var: &mut [f64],
) -> Result<(Vec<Tensor>, BnCache)> {
    let c = gamma.numel();
    check_batch(xs, c)?;
    let plane: usize = xs[0].shape()[1] * xs[0].shape()[2];
    let count = xs.len() * plane;

    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for x in xs {
        for ch in 0..c {
            mean[ch] += x.data()[ch * plane..(ch + 1) * plane].iter().sum::<f64>();
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    for x in xs {
        for ch in 0..c {
            var[ch] += x.data()[ch * plane..(ch + 1) * plane]
                .iter()
                .map(|v| (v - mean[ch]) * (v - mean[ch]))
                .sum::<f64>();
        }
    }
    for v in &mut var {
        *v /= count as f64;
    }

    for ch in 0..c {
        let unbiased = if count > 1 {
            var[ch] * count as f64 / (count - 1) as f64
        } else {
            var[ch]
        };
        running_mean[ch] = (1.0 - BN_MOMENTUM) * running_mean[ch] + BN_MOMENTUM * mean[ch];
        running_var[ch] = (1.0 - BN_MOMENTUM) * running_var[ch] + BN_MOMENTUM * unbiased;
    }

    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut ys = Vec::with_capacity(xs.len());
    let mut xhats = Vec::with_capacity(xs.len());
    for x in xs {
        let mut y = Tensor::zeros(x.shape());
        let mut xh = Tensor::zeros(x.shape());
        for ch in 0..c {
            let (g, b) = (gamma.data()[ch], beta.data()[ch]);
            for j in ch * plane..(ch + 1) * plane {
                let v = (x.data()[j] - mean[ch]) * inv_std[ch];
                xh.data_mut()[j] = v;
                y.data_mut()[j] = g * v + b;
            }
        }
        ys.push(y);
        xhats.push(xh);
    }
    Ok((
        ys,
        BnCache {
            xhat: xhats,
            inv_std,
            count,
        },
    ))
}

/// Eval-mode forward using the running statistics.
pub fn bn_forward_eval(
    xs: &[Tensor],
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &[f64],
    running_var: &[f64],
) -> Result<Vec<Tensor>> {
    let c = gamma.numel();
    check_batch(xs, c)?;
    let plane: usize = xs[0].shape()[1] * xs[0].shape()[2];
    let mut ys = Vec::with_capacity(xs.len());
    for x in xs {
        let mut y = Tensor::zeros(x.shape());
        for ch in 0..c {
            let inv = 1.0 / (running_var[ch] + BN_EPS).sqrt();
            let (g, b, m) = (gamma.data()[ch], beta.data()[ch], running_mean[ch]);
            for j in ch * plane..(ch + 1) * plane {
                y.data_mut()[j] = g * (x.data()[j] - m) * inv + b;
            }
        }
        ys.push(y);
    }
    Ok(ys)
}

/// Training-mode backward: returns (d_gamma, d_beta, d_xs).
pub fn bn_backward(
    cache: &BnCache,
    gamma: &Tensor,
    upstream: &[Tensor],
) -> Result<(Tensor, Tensor, Vec<Tensor>)> {
    let c = gamma.numel();
    let plane: usize = cache.xhat[0].shape()[1] * cache.xhat[0].shape()[2];
    let n = cache.count as f64;

    let mut d_gamma = Tensor::zeros(&[c]);
    let mut d_beta = Tensor::zeros(&[c]);
    let mut sum_up = vec![0.0; c];
    let mut sum_up_xhat = vec![0.0; c];
    for (u, xh) in upstream.iter().zip(&cache.xhat) {
        for ch in 0..c {
            for j in ch * plane..(ch + 1) * plane {
                sum_up[ch] += u.data()[j];
                sum_up_xhat[ch] += u.data()[j] * xh.data()[j];
            }
        }
    }
    for ch in 0..c {
        d_gamma.data_mut()[ch] = sum_up_xhat[ch];
        d_beta.data_mut()[ch] = sum_up[ch];
    }

    let mut d_xs = Vec::with_capacity(upstream.len());
    for (u, xh) in upstream.iter().zip(&cache.xhat) {
        let mut dx = Tensor::zeros(u.shape());
        for ch in 0..c {
            let k = gamma.data()[ch] * cache.inv_std[ch];
            for j in ch * plane..(ch + 1) * plane {
                dx.data_mut()[j] = k
                    * (u.data()[j]
                        - sum_up[ch] / n
                        - xh.data()[j] * sum_up_xhat[ch] / n);
            }
        }
        d_xs.push(dx);
    }
    Ok((d_gamma, d_beta, d_xs))
}

fn check_batch(xs: &[Tensor], c: usize) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    let shape = xs[0].shape();
    if shape.len() != 3 || shape[0] != c {
        return Err(Error::ShapeMismatch(format!(
            "batchnorm expects [C={c}, T, F], got {shape:?}"
        )));
    }
    for x in xs {
        if x.shape() != shape {
            return Err(Error::ShapeMismatch("ragged batch".into()));
        }
    }
    Ok(())
}
