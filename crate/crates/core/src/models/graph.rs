//! Graph construction and execution for the nine architectures.
//!
//! Single-branch graphs run one convolutional stack; two-branch graphs run
//! two stacks over the identical input and concatenate their channel maps
//! exactly once before the shared recurrent head. Frequency-dynamic variants
//! replace the convolutions of blocks 2..6 in the affected branches; the
//! first convolution of a branch always stays static.

use super::layers::{
    BatchNormLayer, BiGruLayer, Conv2dLayer, DenseLayer, FdyConvLayer, FlattenLayer, Layer,
    LayerKind, MaxPoolLayer, ParamRefMut, ReluLayer, SigmoidLayer, StrfConvLayer,
};
use super::{Architecture, ModelConfig};
use crate::nn::ops::{concat_channels, split_channels};
use crate::nn::Tensor;
use crate::rng::Rng;
use crate::strf::default_init_params;
use crate::{Error, Result};

pub struct ModelGraph {
    pub config: ModelConfig,
    branches: Vec<Vec<Layer>>,
    head: Vec<Layer>,
    /// Channel counts entering the concat, recorded by forward for backward.
    concat_split: Vec<usize>,
}

impl ModelGraph {
    /// Build a freshly initialized model.
    pub fn build(config: &ModelConfig) -> Result<ModelGraph> {
        config.validate()?;
        let mut rng = Rng::new(config.seed);
        let n_branches = if config.architecture.is_two_branch() { 2 } else { 1 };
        let mut branches = Vec::with_capacity(n_branches);
        for b in 0..n_branches {
            branches.push(build_branch(config, b, &mut rng)?);
        }
        let tail_channels = config.conv_widths[5] * n_branches;
        let head = build_head(config, tail_channels, &mut rng);
        Ok(ModelGraph {
            config: config.clone(),
            branches,
            head,
            concat_split: Vec::new(),
        })
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    /// Layer kinds per branch, for structural inspection.
    pub fn branch_kinds(&self, branch: usize) -> Vec<LayerKind> {
        self.branches[branch].iter().map(|l| l.kind()).collect()
    }

    pub fn head_kinds(&self) -> Vec<LayerKind> {
        self.head.iter().map(|l| l.kind()).collect()
    }

    /// Frame probabilities for a batch of mel grids ([T, F] each).
    /// `training` selects batch-statistics mode for normalization layers.
    pub fn forward_batch(&mut self, mels: &[Tensor], training: bool) -> Result<Vec<Tensor>> {
        if mels.is_empty() {
            return Err(Error::ShapeMismatch("empty batch".into()));
        }
        for m in mels {
            if m.ndim() != 2 {
                return Err(Error::ShapeMismatch(format!(
                    "model input must be [frames, mels], got {:?}",
                    m.shape()
                )));
            }
            m.check_finite("model input")?;
        }
        let lifted: Vec<Tensor> = mels
            .iter()
            .map(|m| {
                let (t, f) = (m.shape()[0], m.shape()[1]);
                Tensor::from_vec(&[1, t, f], m.data().to_vec())
            })
            .collect();

        let mut branch_outs: Vec<Vec<Tensor>> = Vec::with_capacity(self.branches.len());
        for branch in &mut self.branches {
            let mut xs = lifted.clone();
            for layer in branch.iter_mut() {
                xs = layer.forward_batch(xs, training)?;
            }
            branch_outs.push(xs);
        }

        let mut xs = if branch_outs.len() == 1 {
            branch_outs.pop().unwrap()
        } else {
            self.concat_split = branch_outs.iter().map(|o| o[0].shape()[0]).collect();
            let n = branch_outs[0].len();
            let mut joined = Vec::with_capacity(n);
            for i in 0..n {
                let parts: Vec<&Tensor> = branch_outs.iter().map(|o| &o[i]).collect();
                joined.push(concat_channels(&parts)?);
            }
            joined
        };

        for layer in self.head.iter_mut() {
            xs = layer.forward_batch(xs, training)?;
        }
        Ok(xs)
    }

    /// Backpropagate output gradients; parameter gradients accumulate into
    /// the layers' buffers. Requires a preceding training-mode forward.
    pub fn backward_batch(&mut self, upstreams: Vec<Tensor>) -> Result<()> {
        let mut grads = upstreams;
        for layer in self.head.iter_mut().rev() {
            grads = layer.backward_batch(grads)?;
        }
        if self.branches.len() == 1 {
            let branch = &mut self.branches[0];
            let mut g = grads;
            for layer in branch.iter_mut().rev() {
                g = layer.backward_batch(g)?;
            }
        } else {
            let split = self.concat_split.clone();
            if split.len() != self.branches.len() {
                return Err(Error::InvalidConfig(
                    "backward before a two-branch forward".into(),
                ));
            }
            let mut per_branch: Vec<Vec<Tensor>> =
                (0..self.branches.len()).map(|_| Vec::new()).collect();
            for g in &grads {
                for (b, part) in split_channels(g, &split).into_iter().enumerate() {
                    per_branch[b].push(part);
                }
            }
            for (branch, mut g) in self.branches.iter_mut().zip(per_branch) {
                for layer in branch.iter_mut().rev() {
                    g = layer.backward_batch(g)?;
                }
            }
        }
        Ok(())
    }

    /// All trainable parameters with their gradient buffers, fixed order.
    pub fn params_mut(&mut self) -> Vec<ParamRefMut<'_>> {
        let mut out = Vec::new();
        for (b, branch) in self.branches.iter_mut().enumerate() {
            for (i, layer) in branch.iter_mut().enumerate() {
                out.extend(layer.params_mut(&format!("branch{b}.{i}.{}", layer.kind())));
            }
        }
        for (i, layer) in self.head.iter_mut().enumerate() {
            out.extend(layer.params_mut(&format!("head.{i}.{}", layer.kind())));
        }
        out
    }

    /// (name, element count) pairs matching `params_mut` order.
    pub fn params_meta(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        for (b, branch) in self.branches.iter().enumerate() {
            for (i, layer) in branch.iter().enumerate() {
                out.extend(layer.params_meta(&format!("branch{b}.{i}.{}", layer.kind())));
            }
        }
        for (i, layer) in self.head.iter().enumerate() {
            out.extend(layer.params_meta(&format!("head.{i}.{}", layer.kind())));
        }
        out
    }

    /// Non-trainable state (normalization running statistics).
    pub fn buffers_mut(&mut self) -> Vec<super::layers::BufferRefMut<'_>> {
        let mut out = Vec::new();
        for (b, branch) in self.branches.iter_mut().enumerate() {
            for (i, layer) in branch.iter_mut().enumerate() {
                out.extend(layer.buffers_mut(&format!("branch{b}.{i}.{}", layer.kind())));
            }
        }
        for (i, layer) in self.head.iter_mut().enumerate() {
            out.extend(layer.buffers_mut(&format!("head.{i}.{}", layer.kind())));
        }
        out
    }

    pub fn buffers_meta(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        for (b, branch) in self.branches.iter().enumerate() {
            for (i, layer) in branch.iter().enumerate() {
                out.extend(layer.buffers_meta(&format!("branch{b}.{i}.{}", layer.kind())));
            }
        }
        for (i, layer) in self.head.iter().enumerate() {
            out.extend(layer.buffers_meta(&format!("head.{i}.{}", layer.kind())));
        }
        out
    }

    /// Total trainable scalars. Each STRF pair contributes its two log
    /// parameters, not the 50x48 taps derived from them.
    pub fn param_count(&self) -> usize {
        self.params_meta().iter().map(|(_, n)| n).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            for g in p.grad.data_mut() {
                *g = 0.0;
            }
        }
    }

    /// Materialize the STRF kernel bank of `branch`, if that branch has an
    /// STRF front-end; reflects the current trained parameters.
    pub fn strf_bank(&mut self, branch: usize) -> Result<Option<crate::strf::StrfBank>> {
        match self.branches.get_mut(branch).and_then(|b| b.first_mut()) {
            Some(Layer::StrfConv(l)) => Ok(Some(l.bank()?)),
            _ => Ok(None),
        }
    }
}

fn build_branch(config: &ModelConfig, branch: usize, rng: &mut Rng) -> Result<Vec<Layer>> {
    let arch = config.architecture;
    let mut layers = Vec::new();
    let strf_channels = 2 * config.strf_pairs;

    // branch front-end decides the channel count entering block 1
    let mut in_channels = 1;
    if arch.strf_in_branch(branch) {
        let pairs = if config.strf_pairs == 32 {
            default_init_params()
        } else {
            scaled_init_grid(config.strf_pairs)
        };
        layers.push(Layer::StrfConv(StrfConvLayer::new(&pairs, config.strf_axes)?));
        in_channels = strf_channels;
    } else if arch.is_two_branch() && arch != Architecture::TbBaseline {
        // the plain branch of a two-branch STRF model lifts the input with a
        // static conv so both branches enter their blocks at equal width
        layers.push(Layer::Conv2d(Conv2dLayer::new(
            1,
            strf_channels,
            config.conv_kernel.0,
            config.conv_kernel.1,
            rng,
        )));
        in_channels = strf_channels;
    }

    let fdy_here = arch.fdy_in_branch(branch);
    for (block, &width) in config.conv_widths.iter().enumerate() {
        // block 1 stays static even in frequency-dynamic branches
        if fdy_here && block > 0 {
            layers.push(Layer::FdyConv(FdyConvLayer::new(
                in_channels,
                width,
                config.conv_kernel.0,
                config.conv_kernel.1,
                &config.fdy,
                rng,
            )?));
        } else {
            layers.push(Layer::Conv2d(Conv2dLayer::new(
                in_channels,
                width,
                config.conv_kernel.0,
                config.conv_kernel.1,
                rng,
            )));
        }
        layers.push(Layer::BatchNorm(BatchNormLayer::new(width)));
        layers.push(Layer::Relu(ReluLayer::default()));
        layers.push(Layer::MaxPool(MaxPoolLayer::new(
            config.pool_plan[block].0,
            config.pool_plan[block].1,
        )));
        in_channels = width;
    }
    Ok(layers)
}

fn build_head(config: &ModelConfig, tail_channels: usize, rng: &mut Rng) -> Vec<Layer> {
    let d_in = tail_channels * config.pooled_mels();
    let h = config.gru_hidden;
    vec![
        Layer::Flatten(FlattenLayer::default()),
        Layer::BiGru(BiGruLayer::new(d_in, h, rng)),
        Layer::BiGru(BiGruLayer::new(2 * h, h, rng)),
        Layer::Dense(DenseLayer::new(2 * h, h, rng)),
        Layer::Relu(ReluLayer::default()),
        Layer::Dense(DenseLayer::new(h, config.n_classes, rng)),
        Layer::Sigmoid(SigmoidLayer::default()),
    ]
}

/// Init grid for non-default pair counts: log-spaced scales crossed with up
/// to four log-spaced rates.
fn scaled_init_grid(pairs: usize) -> Vec<crate::strf::ScaleRateParam> {
    use crate::strf::{Direction, ScaleRateParam};
    let n_rates = pairs.min(4).max(1);
    let n_scales = pairs.div_ceil(n_rates);
    let mut out = Vec::with_capacity(pairs);
    for si in 0..n_scales {
        let s = 0.25 * (8.0f64 / 0.25).powf(si as f64 / (n_scales.max(2) - 1) as f64);
        for ri in 0..n_rates {
            if out.len() == pairs {
                break;
            }
            let r = 0.3 * (2.4f64 / 0.3).powf(ri as f64 / (n_rates.max(2) - 1) as f64);
            out.push(ScaleRateParam::new(s, r, Direction::Down));
        }
    }
    out
}
