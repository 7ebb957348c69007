//! Stateful layer wrappers over the nn primitives: each layer owns its
//! parameters, gradient buffers and forward caches, and maps the per-sample
//! primitives over a batch (batch normalization sees the whole batch).

use crate::fdy::{fdy_backward, fdy_forward, FdyConfig, FdyLayer};
use crate::nn::batchnorm::{bn_backward, bn_forward_eval, bn_forward_train, BnCache};
use crate::nn::gru::{
    bigru_backward, bigru_forward, GruCache, GruGrads, GruParams,
};
use crate::nn::ops;
use crate::nn::{init, Tensor};
use crate::rng::Rng;
use crate::strf::{KernelAxes, ScaleRateParam, StrfConv};
use crate::{Error, Result};

/// Mutable view of one trainable parameter and its gradient buffer.
pub struct ParamRefMut<'a> {
    pub name: String,
    pub value: &'a mut Tensor,
    pub grad: &'a mut Tensor,
}

/// Mutable view of a non-trainable state buffer (running statistics).
pub struct BufferRefMut<'a> {
    pub name: String,
    pub value: &'a mut Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv2d,
    BatchNorm,
    Relu,
    MaxPool,
    StrfConv,
    FdyConv,
    Flatten,
    BiGru,
    Dense,
    Sigmoid,
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LayerKind::Conv2d => "conv2d",
            LayerKind::BatchNorm => "batchnorm",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool => "maxpool2d",
            LayerKind::StrfConv => "strfconv",
            LayerKind::FdyConv => "fdyconv",
            LayerKind::Flatten => "flatten",
            LayerKind::BiGru => "bigru",
            LayerKind::Dense => "dense",
            LayerKind::Sigmoid => "sigmoid",
        };
        write!(f, "{s}")
    }
}

pub enum Layer {
    Conv2d(Conv2dLayer),
    BatchNorm(BatchNormLayer),
    Relu(ReluLayer),
    MaxPool(MaxPoolLayer),
    StrfConv(StrfConvLayer),
    FdyConv(FdyConvLayer),
    Flatten(FlattenLayer),
    BiGru(BiGruLayer),
    Dense(DenseLayer),
    Sigmoid(SigmoidLayer),
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::BatchNorm(_) => LayerKind::BatchNorm,
            Layer::Relu(_) => LayerKind::Relu,
            Layer::MaxPool(_) => LayerKind::MaxPool,
            Layer::StrfConv(_) => LayerKind::StrfConv,
            Layer::FdyConv(_) => LayerKind::FdyConv,
            Layer::Flatten(_) => LayerKind::Flatten,
            Layer::BiGru(_) => LayerKind::BiGru,
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Sigmoid(_) => LayerKind::Sigmoid,
        }
    }

    pub fn forward_batch(&mut self, xs: Vec<Tensor>, training: bool) -> Result<Vec<Tensor>> {
        match self {
            Layer::Conv2d(l) => l.forward(xs),
            Layer::BatchNorm(l) => l.forward(xs, training),
            Layer::Relu(l) => l.forward(xs),
            Layer::MaxPool(l) => l.forward(xs),
            Layer::StrfConv(l) => l.forward(xs),
            Layer::FdyConv(l) => l.forward(xs),
            Layer::Flatten(l) => l.forward(xs),
            Layer::BiGru(l) => l.forward(xs),
            Layer::Dense(l) => l.forward(xs),
            Layer::Sigmoid(l) => l.forward(xs),
        }
    }

    /// Accumulates parameter gradients; returns input gradients.
    pub fn backward_batch(&mut self, ups: Vec<Tensor>) -> Result<Vec<Tensor>> {
        match self {
            Layer::Conv2d(l) => l.backward(ups),
            Layer::BatchNorm(l) => l.backward(ups),
            Layer::Relu(l) => l.backward(ups),
            Layer::MaxPool(l) => l.backward(ups),
            Layer::StrfConv(l) => l.backward(ups),
            Layer::FdyConv(l) => l.backward(ups),
            Layer::Flatten(l) => l.backward(ups),
            Layer::BiGru(l) => l.backward(ups),
            Layer::Dense(l) => l.backward(ups),
            Layer::Sigmoid(l) => l.backward(ups),
        }
    }

    /// (name, element count) of each trainable parameter, in a fixed order.
    pub fn params_meta(&self, prefix: &str) -> Vec<(String, usize)> {
        match self {
            Layer::Conv2d(l) => vec![
                (format!("{prefix}.weight"), l.w.numel()),
                (format!("{prefix}.bias"), l.b.numel()),
            ],
            Layer::BatchNorm(l) => vec![
                (format!("{prefix}.gamma"), l.gamma.numel()),
                (format!("{prefix}.beta"), l.beta.numel()),
            ],
            Layer::StrfConv(l) => vec![(format!("{prefix}.scale_rate"), l.params.numel())],
            Layer::FdyConv(l) => vec![
                (format!("{prefix}.basis"), l.layer.basis.numel()),
                (format!("{prefix}.bias"), l.layer.bias.numel()),
                (format!("{prefix}.attn_w1"), l.layer.attn_w1.numel()),
                (format!("{prefix}.attn_b1"), l.layer.attn_b1.numel()),
                (format!("{prefix}.attn_w2"), l.layer.attn_w2.numel()),
                (format!("{prefix}.attn_b2"), l.layer.attn_b2.numel()),
            ],
            Layer::BiGru(l) => vec![
                (format!("{prefix}.fwd.w_ih"), l.fwd.w_ih.numel()),
                (format!("{prefix}.fwd.w_hh"), l.fwd.w_hh.numel()),
                (format!("{prefix}.fwd.b_ih"), l.fwd.b_ih.numel()),
                (format!("{prefix}.fwd.b_hh"), l.fwd.b_hh.numel()),
                (format!("{prefix}.bwd.w_ih"), l.bwd.w_ih.numel()),
                (format!("{prefix}.bwd.w_hh"), l.bwd.w_hh.numel()),
                (format!("{prefix}.bwd.b_ih"), l.bwd.b_ih.numel()),
                (format!("{prefix}.bwd.b_hh"), l.bwd.b_hh.numel()),
            ],
            Layer::Dense(l) => vec![
                (format!("{prefix}.weight"), l.w.numel()),
                (format!("{prefix}.bias"), l.b.numel()),
            ],
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self, prefix: &str) -> Vec<ParamRefMut<'_>> {
        match self {
            Layer::Conv2d(l) => vec![
                ParamRefMut {
                    name: format!("{prefix}.weight"),
                    value: &mut l.w,
                    grad: &mut l.dw,
                },
                ParamRefMut {
                    name: format!("{prefix}.bias"),
                    value: &mut l.b,
                    grad: &mut l.db,
                },
            ],
            Layer::BatchNorm(l) => vec![
                ParamRefMut {
                    name: format!("{prefix}.gamma"),
                    value: &mut l.gamma,
                    grad: &mut l.dgamma,
                },
                ParamRefMut {
                    name: format!("{prefix}.beta"),
                    value: &mut l.beta,
                    grad: &mut l.dbeta,
                },
            ],
            Layer::StrfConv(l) => vec![ParamRefMut {
                name: format!("{prefix}.scale_rate"),
                value: &mut l.params,
                grad: &mut l.grads,
            }],
            Layer::FdyConv(l) => vec![
                ParamRefMut {
                    name: format!("{prefix}.basis"),
                    value: &mut l.layer.basis,
                    grad: &mut l.d_basis,
                },
                ParamRefMut {
                    name: format!("{prefix}.bias"),
                    value: &mut l.layer.bias,
                    grad: &mut l.d_bias,
                },
                ParamRefMut {
                    name: format!("{prefix}.attn_w1"),
                    value: &mut l.layer.attn_w1,
                    grad: &mut l.d_attn_w1,
                },
                ParamRefMut {
                    name: format!("{prefix}.attn_b1"),
                    value: &mut l.layer.attn_b1,
                    grad: &mut l.d_attn_b1,
                },
                ParamRefMut {
                    name: format!("{prefix}.attn_w2"),
                    value: &mut l.layer.attn_w2,
                    grad: &mut l.d_attn_w2,
                },
                ParamRefMut {
                    name: format!("{prefix}.attn_b2"),
                    value: &mut l.layer.attn_b2,
                    grad: &mut l.d_attn_b2,
                },
            ],
            Layer::BiGru(l) => vec![
                ParamRefMut {
                    name: format!("{prefix}.fwd.w_ih"),
                    value: &mut l.fwd.w_ih,
                    grad: &mut l.gf.d_w_ih,
                },
                ParamRefMut {
                    name: format!("{prefix}.fwd.w_hh"),
                    value: &mut l.fwd.w_hh,
                    grad: &mut l.gf.d_w_hh,
                },
                ParamRefMut {
                    name: format!("{prefix}.fwd.b_ih"),
                    value: &mut l.fwd.b_ih,
                    grad: &mut l.gf.d_b_ih,
                },
                ParamRefMut {
                    name: format!("{prefix}.fwd.b_hh"),
                    value: &mut l.fwd.b_hh,
                    grad: &mut l.gf.d_b_hh,
                },
                ParamRefMut {
                    name: format!("{prefix}.bwd.w_ih"),
                    value: &mut l.bwd.w_ih,
                    grad: &mut l.gb.d_w_ih,
                },
                ParamRefMut {
                    name: format!("{prefix}.bwd.w_hh"),
                    value: &mut l.bwd.w_hh,
                    grad: &mut l.gb.d_w_hh,
                },
                ParamRefMut {
                    name: format!("{prefix}.bwd.b_ih"),
                    value: &mut l.bwd.b_ih,
                    grad: &mut l.gb.d_b_ih,
                },
                ParamRefMut {
                    name: format!("{prefix}.bwd.b_hh"),
                    value: &mut l.bwd.b_hh,
                    grad: &mut l.gb.d_b_hh,
                },
            ],
            Layer::Dense(l) => vec![
                ParamRefMut {
                    name: format!("{prefix}.weight"),
                    value: &mut l.w,
                    grad: &mut l.dw,
                },
                ParamRefMut {
                    name: format!("{prefix}.bias"),
                    value: &mut l.b,
                    grad: &mut l.db,
                },
            ],
            _ => vec![],
        }
    }

    pub fn buffers_mut(&mut self, prefix: &str) -> Vec<BufferRefMut<'_>> {
        match self {
            Layer::BatchNorm(l) => vec![
                BufferRefMut {
                    name: format!("{prefix}.running_mean"),
                    value: &mut l.running_mean,
                },
                BufferRefMut {
                    name: format!("{prefix}.running_var"),
                    value: &mut l.running_var,
                },
            ],
            _ => vec![],
        }
    }

    pub fn buffers_meta(&self, prefix: &str) -> Vec<(String, usize)> {
        match self {
            Layer::BatchNorm(l) => vec![
                (format!("{prefix}.running_mean"), l.running_mean.len()),
                (format!("{prefix}.running_var"), l.running_var.len()),
            ],
            _ => vec![],
        }
    }
}

pub struct Conv2dLayer {
    pub w: Tensor,
    pub b: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
    cache: Vec<Tensor>,
}

impl Conv2dLayer {
    pub fn new(c_in: usize, c_out: usize, k_t: usize, k_f: usize, rng: &mut Rng) -> Conv2dLayer {
        let fan_in = c_in * k_t * k_f;
        Conv2dLayer {
            w: init::uniform_fan_in(&[c_out, c_in, k_t, k_f], fan_in, rng),
            b: init::uniform_fan_in(&[c_out], fan_in, rng),
            dw: Tensor::zeros(&[c_out, c_in, k_t, k_f]),
            db: Tensor::zeros(&[c_out]),
            cache: Vec::new(),
        }
    }

    fn forward(&mut self, xs: Vec<Tensor>) -> Result<Vec<Tensor>> {
        let mut out = Vec::with_capacity(xs.len());
        for x in &xs {
            out.push(ops::conv2d_forward(x, &self.w, &self.b)?);
        }
        self.cache = xs;
        Ok(out)
    }

    fn backward(&mut self, ups: Vec<Tensor>) -> Result<Vec<Tensor>> {
        if ups.len() != self.cache.len() {
            return Err(Error::ShapeMismatch("conv2d backward batch".into()));
        }
        let mut d_ins = Vec::with_capacity(ups.len());
        for (x, up) in self.cache.iter().zip(&ups) {
            let (dw, db, din) = ops::conv2d_backward(x, &self.w, up)?;
            self.dw.add_assign(&dw);
            self.db.add_assign(&db);
            d_ins.push(din);
        }
        Ok(d_ins)
    }
}

pub struct BatchNormLayer {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub dgamma: Tensor,
    pub dbeta: Tensor,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    cache: Option<BnCache>,
}

impl BatchNormLayer {
    pub fn new(channels: usize) -> BatchNormLayer {
        BatchNormLayer {
            gamma: Tensor::full(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            dgamma: Tensor::zeros(&[channels]),
            dbeta: Tensor::zeros(&[channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            cache: None,
        }
    }

    fn forward(&mut self, xs: Vec<Tensor>, training: bool) -> Result<Vec<Tensor>> {
        if training {
            let (ys, cache) = bn_forward_train(
                &xs,
                &self.gamma,
                &self.beta,
                &mut self.running_mean,
                &mut self.running_var,
            )?;
            self.cache = Some(cache);
            Ok(ys)
        } else {
            self.cache = None;
            bn_forward_eval(&xs, &self.gamma, &self.beta, &self.running_mean, &self.running_var)
        }
    }

    fn backward(&mut self, ups: Vec<Tensor>) -> Result<Vec<Tensor>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("batchnorm backward without training forward".into()))?;
        let (dg, db, dxs) = bn_backward(cache, &self.gamma, &ups)?;
        self.dgamma.add_assign(&dg);
        self.dbeta.add_assign(&db);
        Ok(dxs)
    }
}

#[derive(Default)]
pub struct ReluLayer {
    cache: Vec<Tensor>,
}

impl ReluLayer {
    fn forward(&mut self, xs: Vec<Tensor>) -> Result<Vec<Tensor>> {
        let out = xs.iter().map(ops::relu).collect();
        self.cache = xs;
        Ok(out)
    }

    fn backward(&mut self, ups: Vec<Tensor>) -> Result<Vec<Tensor>> {
        Ok(self
            .cache
            .iter()
            .zip(&ups)
            .map(|(x, u)| ops::relu_backward(x, u))
            .collect())
    }
}

#[derive(Default)]
pub struct SigmoidLayer {
    cache: Vec<Tensor>,
}

impl SigmoidLayer {
    fn forward(&mut self, xs: Vec<Tensor>) -> Result<Vec<Tensor>> {
        let out: Vec<Tensor> = xs.iter().map(ops::sigmoid).collect();
        self.cache = out.clone();
        Ok(out)
    }

    fn backward(&mut self, ups: Vec<Tensor>) -> Result<Vec<Tensor>> {
        Ok(self
            .cache
            .iter()
            .zip(&ups)
            .map(|(y, u)| ops::sigmoid_backward(y, u))
            .collect())
    }
}

pub struct MaxPoolLayer {
    pub p_t: usize,
    pub p_f: usize,
    cache: Vec<(Vec<usize>, Vec<usize>)>, // (input shape, argmax)
}

impl MaxPoolLayer {
    pub fn new(p_t: usize, p_f: usize) -> MaxPoolLayer {
        MaxPoolLayer {
            p_t,
            p_f,
            cache: Vec::new(),
        }
    }

    fn forward(&mut self, xs: Vec<Tensor>) -> Result<Vec<Tensor>> {
        self.cache.clear();
        let mut out = Vec::with_capacity(xs.len());
        for x in &xs {
            let (y, argmax) = ops::maxpool2d_forward(x, self.p_t, self.p_f)?;
            self.cache.push((x.shape().to_vec(), argmax));
            out.push(y);
        }
        Ok(out)
    }

    fn backward(&mut self, ups: Vec<Tensor>) -> Result<Vec<Tensor>> {
        Ok(self
            .cache
            .iter()
            .zip(&ups)
            .map(|((shape, argmax), up)| ops::maxpool2d_backward(shape, argmax, up))
            .collect())
    }
}

/// STRF convolution as a trainable layer: the parameter tensor holds
/// (log scale, log rate) rows; kernels are re-derived whenever it changes.
pub struct StrfConvLayer {
    pub params: Tensor, // [n_pairs, 2]
    pub grads: Tensor,  // [n_pairs, 2]
    conv: StrfConv,
    built_from: Vec<f64>,
    /// The graph places this layer first, so input gradients are skipped
    /// unless explicitly requested.
    pub needs_input_grad: bool,
    cache: Vec<(Tensor, Tensor)>, // (input grid [T,F], output [2P,T,F])
}

impl StrfConvLayer {
    pub fn new(pairs: &[ScaleRateParam], axes: KernelAxes) -> Result<StrfConvLayer> {
        let conv = StrfConv::new(pairs, &axes)?;
        let mut params = Tensor::zeros(&[pairs.len(), 2]);
        for (i, p) in pairs.iter().enumerate() {
            params.data_mut()[2 * i] = p.log_scale;
            params.data_mut()[2 * i + 1] = p.log_rate;
        }
        let built_from = params.data().to_vec();
        Ok(StrfConvLayer {
            grads: Tensor::zeros(&[pairs.len(), 2]),
            params,
            conv,
            built_from,
            needs_input_grad: false,
            cache: Vec::new(),
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.params.shape()[0]
    }

    fn param_list(&self) -> Vec<ScaleRateParam> {
        (0..self.n_pairs())
            .map(|i| ScaleRateParam {
                log_scale: self.params.data()[2 * i],
                log_rate: self.params.data()[2 * i + 1],
                direction: crate::strf::Direction::Down,
            })
            .collect()
    }

    /// Rebuild the kernel factors if the optimizer moved the parameters.
    pub fn refresh(&mut self) -> Result<()> {
        if self.built_from != self.params.data() {
            self.conv.set_params(&self.param_list())?;
            self.built_from = self.params.data().to_vec();
        }
        Ok(())
    }

    /// Materialize the current kernel bank (after any pending refresh).
    pub fn bank(&mut self) -> Result<crate::strf::StrfBank> {
        self.refresh()?;
        self.conv.bank()
    }

    fn forward(&mut self, xs: Vec<Tensor>) -> Result<Vec<Tensor>> {
        self.refresh()?;
        self.cache.clear();
        let mut out = Vec::with_capacity(xs.len());
        for x in &xs {
            let grid = as_single_channel_grid(x)?;
            let y = self.conv.forward(&grid)?;
            self.cache.push((grid, y.clone()));
            out.push(y);
        }
        Ok(out)
    }

    fn backward(&mut self, ups: Vec<Tensor>) -> Result<Vec<Tensor>> {
        if ups.len() != self.cache.len() {
            return Err(Error::ShapeMismatch("strfconv backward batch".into()));
        }
        let mut d_ins = Vec::with_capacity(ups.len());
        for ((grid, out), up) in self.cache.iter().zip(&ups) {
            let pair_grads = self.conv.param_grads(grid, up, out)?;
            for (i, g) in pair_grads.iter().enumerate() {
                self.grads.data_mut()[2 * i] += g.d_log_scale;
                self.grads.data_mut()[2 * i + 1] += g.d_log_rate;
            }
            if self.needs_input_grad {
                let din = self.conv.input_grad(up)?;
                let (t_len, f_len) = (din.shape()[0], din.shape()[1]);
                d_ins.push(din.reshaped(&[1, t_len, f_len]));
            } else {
                let (t_len, f_len) = (grid.shape()[0], grid.shape()[1]);
                d_ins.push(Tensor::zeros(&[1, t_len, f_len]));
            }
        }
        Ok(d_ins)
    }
}

fn as_single_channel_grid(x: &Tensor) -> Result<Tensor> {
    match x.shape() {
        [1, t, f] => Ok(Tensor::from_vec(&[*t, *f], x.data().to_vec())),
        s => Err(Error::ShapeMismatch(format!(
            "strfconv expects single-channel input, got {s:?}"
        ))),
    }
}

pub struct FdyConvLayer {
    pub layer: FdyLayer,
    pub d_basis: Tensor,
    pub d_bias: Tensor,
    pub d_attn_w1: Tensor,
    pub d_attn_b1: Tensor,
    pub d_attn_w2: Tensor,
    pub d_attn_b2: Tensor,
    cache: Vec<Tensor>,
}

impl FdyConvLayer {
    pub fn new(
        c_in: usize,
        c_out: usize,
        k_t: usize,
        k_f: usize,
        cfg: &FdyConfig,
        rng: &mut Rng,
    ) -> Result<FdyConvLayer> {
        let layer = FdyLayer::new(c_in, c_out, k_t, k_f, cfg, rng)?;
        Ok(FdyConvLayer {
            d_basis: Tensor::zeros(layer.basis.shape()),
            d_bias: Tensor::zeros(layer.bias.shape()),
            d_attn_w1: Tensor::zeros(layer.attn_w1.shape()),
            d_attn_b1: Tensor::zeros(layer.attn_b1.shape()),
            d_attn_w2: Tensor::zeros(layer.attn_w2.shape()),
            d_attn_b2: Tensor::zeros(layer.attn_b2.shape()),
            layer,
            cache: Vec::new(),
        })
    }

    fn forward(&mut self, xs: Vec<Tensor>) -> Result<Vec<Tensor>> {
        let mut out = Vec::with_capacity(xs.len());
        for x in &xs {
            out.push(fdy_forward(x, &self.layer)?);
        }
        self.cache = xs;
        Ok(out)
    }

    fn backward(&mut self, ups: Vec<Tensor>) -> Result<Vec<Tensor>> {
        if ups.len() != self.cache.len() {
            return Err(Error::ShapeMismatch("fdyconv backward batch".into()));
        }
        let mut d_ins = Vec::with_capacity(ups.len());
        for (x, up) in self.cache.iter().zip(&ups) {
            let g = fdy_backward(up, x, &self.layer)?;
            self.d_basis.add_assign(&g.d_basis);
            self.d_bias.add_assign(&g.d_bias);
            self.d_attn_w1.add_assign(&g.d_attn_w1);
            self.d_attn_b1.add_assign(&g.d_attn_b1);
            self.d_attn_w2.add_assign(&g.d_attn_w2);
            self.d_attn_b2.add_assign(&g.d_attn_b2);
            d_ins.push(g.d_input);
        }
        Ok(d_ins)
    }
}

/// [C, T, F] -> [T, C * F] with feature index c * F + f.
#[derive(Default)]
pub struct FlattenLayer {
    cache_shape: Option<Vec<usize>>,
}

impl FlattenLayer {
    fn forward(&mut self, xs: Vec<Tensor>) -> Result<Vec<Tensor>> {
        let mut out = Vec::with_capacity(xs.len());
        for x in &xs {
            let (c, t_len, f_len) = match x.shape() {
                [c, t, f] => (*c, *t, *f),
                s => return Err(Error::ShapeMismatch(format!("flatten input {s:?}"))),
            };
            self.cache_shape = Some(vec![c, t_len, f_len]);
            let mut y = Tensor::zeros(&[t_len, c * f_len]);
            for ch in 0..c {
                for t in 0..t_len {
                    for f in 0..f_len {
                        let idx = y.ix2(t, ch * f_len + f);
                        y.data_mut()[idx] = x.at3(ch, t, f);
                    }
                }
            }
            out.push(y);
        }
        Ok(out)
    }

    fn backward(&mut self, ups: Vec<Tensor>) -> Result<Vec<Tensor>> {
        let shape = self
            .cache_shape
            .clone()
            .ok_or_else(|| Error::InvalidConfig("flatten backward before forward".into()))?;
        let (c, t_len, f_len) = (shape[0], shape[1], shape[2]);
        let mut out = Vec::with_capacity(ups.len());
        for up in &ups {
            let mut dx = Tensor::zeros(&[c, t_len, f_len]);
            for ch in 0..c {
                for t in 0..t_len {
                    for f in 0..f_len {
                        let idx = dx.ix3(ch, t, f);
                        dx.data_mut()[idx] = up.at2(t, ch * f_len + f);
                    }
                }
            }
            out.push(dx);
        }
        Ok(out)
    }
}

pub struct BiGruLayer {
    pub fwd: GruParams,
    pub bwd: GruParams,
    pub gf: GruGrads,
    pub gb: GruGrads,
    cache: Vec<(Tensor, Tensor, GruCache, GruCache)>, // (x, x_rev, cf, cb)
}

impl BiGruLayer {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut Rng) -> BiGruLayer {
        let mut make = |d: usize| {
            let mut p = GruParams::zeros(d, hidden);
            p.w_ih = init::uniform_fan_in(&[3 * hidden, d], hidden, rng);
            p.w_hh = init::uniform_fan_in(&[3 * hidden, hidden], hidden, rng);
            p.b_ih = init::uniform_fan_in(&[3 * hidden], hidden, rng);
            p.b_hh = init::uniform_fan_in(&[3 * hidden], hidden, rng);
            p
        };
        let fwd = make(input_dim);
        let bwd = make(input_dim);
        let zero_grads = |p: &GruParams| GruGrads {
            d_w_ih: Tensor::zeros(p.w_ih.shape()),
            d_w_hh: Tensor::zeros(p.w_hh.shape()),
            d_b_ih: Tensor::zeros(p.b_ih.shape()),
            d_b_hh: Tensor::zeros(p.b_hh.shape()),
        };
        BiGruLayer {
            gf: zero_grads(&fwd),
            gb: zero_grads(&bwd),
            fwd,
            bwd,
            cache: Vec::new(),
        }
    }

    fn forward(&mut self, xs: Vec<Tensor>) -> Result<Vec<Tensor>> {
        self.cache.clear();
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let (y, cf, cb, x_rev) = bigru_forward(&self.fwd, &self.bwd, &x)?;
            self.cache.push((x, x_rev, cf, cb));
            out.push(y);
        }
        Ok(out)
    }

    fn backward(&mut self, ups: Vec<Tensor>) -> Result<Vec<Tensor>> {
        if ups.len() != self.cache.len() {
            return Err(Error::ShapeMismatch("bigru backward batch".into()));
        }
        let mut d_ins = Vec::with_capacity(ups.len());
        for ((x, x_rev, cf, cb), up) in self.cache.iter().zip(&ups) {
            let dx = bigru_backward(
                &self.fwd,
                &self.bwd,
                x,
                x_rev,
                cf,
                cb,
                up,
                &mut self.gf,
                &mut self.gb,
            )?;
            d_ins.push(dx);
        }
        Ok(d_ins)
    }
}

pub struct DenseLayer {
    pub w: Tensor,
    pub b: Tensor,
    pub dw: Tensor,
    pub db: Tensor,
    cache: Vec<Tensor>,
}

impl DenseLayer {
    pub fn new(d_in: usize, d_out: usize, rng: &mut Rng) -> DenseLayer {
        DenseLayer {
            w: init::uniform_fan_in(&[d_out, d_in], d_in, rng),
            b: init::uniform_fan_in(&[d_out], d_in, rng),
            dw: Tensor::zeros(&[d_out, d_in]),
            db: Tensor::zeros(&[d_out]),
            cache: Vec::new(),
        }
    }

    fn forward(&mut self, xs: Vec<Tensor>) -> Result<Vec<Tensor>> {
        let mut out = Vec::with_capacity(xs.len());
        for x in &xs {
            out.push(ops::dense_forward(x, &self.w, &self.b)?);
        }
        self.cache = xs;
        Ok(out)
    }

    fn backward(&mut self, ups: Vec<Tensor>) -> Result<Vec<Tensor>> {
        if ups.len() != self.cache.len() {
            return Err(Error::ShapeMismatch("dense backward batch".into()));
        }
        let mut d_ins = Vec::with_capacity(ups.len());
        for (x, up) in self.cache.iter().zip(&ups) {
            let (dw, db, dx) = ops::dense_backward(x, &self.w, up)?;
            self.dw.add_assign(&dw);
            self.db.add_assign(&db);
            d_ins.push(dx);
        }
        Ok(d_ins)
    }
}
