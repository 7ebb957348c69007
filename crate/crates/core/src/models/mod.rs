//! The model zoo: a CRNN baseline, its STRF-fronted variant, two-branch
//! compositions and the frequency-dynamic versions of each, plus training
//! and checkpoint I/O.

mod checkpoint;
mod graph;
mod layers;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use graph::ModelGraph;
pub use layers::LayerKind;
pub use train::{train, train_step, TrainConfig, TrainItem};

use crate::fdy::FdyConfig;
use crate::strf::KernelAxes;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// The nine buildable architectures. CLI names are the kebab-case forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Baseline,
    Strfnet,
    TbBaseline,
    TbStrfnet,
    FdyCrnn,
    StrfFdynet,
    TbStrfFdynet1,
    TbStrfFdynet2,
    TbStrfFdynet3,
}

impl Architecture {
    pub const ALL: [Architecture; 9] = [
        Architecture::Baseline,
        Architecture::Strfnet,
        Architecture::TbBaseline,
        Architecture::TbStrfnet,
        Architecture::FdyCrnn,
        Architecture::StrfFdynet,
        Architecture::TbStrfFdynet1,
        Architecture::TbStrfFdynet2,
        Architecture::TbStrfFdynet3,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Baseline => "baseline",
            Architecture::Strfnet => "strfnet",
            Architecture::TbBaseline => "tb-baseline",
            Architecture::TbStrfnet => "tb-strfnet",
            Architecture::FdyCrnn => "fdy-crnn",
            Architecture::StrfFdynet => "strf-fdynet",
            Architecture::TbStrfFdynet1 => "tb-strf-fdynet1",
            Architecture::TbStrfFdynet2 => "tb-strf-fdynet2",
            Architecture::TbStrfFdynet3 => "tb-strf-fdynet3",
        }
    }

    pub fn valid_names() -> String {
        Architecture::ALL
            .iter()
            .map(|a| a.name())
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Two-branch architectures concatenate branch features before the head.
    pub fn is_two_branch(&self) -> bool {
        matches!(
            self,
            Architecture::TbBaseline
                | Architecture::TbStrfnet
                | Architecture::TbStrfFdynet1
                | Architecture::TbStrfFdynet2
                | Architecture::TbStrfFdynet3
        )
    }

    /// Does the given branch (0 = STRF / first, 1 = baseline / second) get
    /// its block convolutions replaced by frequency-dynamic ones? The first
    /// convolution block of an affected branch always stays static, mirroring
    /// the placement rule that the first layer of each branch is not dynamic.
    pub fn fdy_in_branch(&self, branch: usize) -> bool {
        match self {
            Architecture::FdyCrnn | Architecture::StrfFdynet => branch == 0,
            Architecture::TbStrfFdynet1 => branch == 1,
            Architecture::TbStrfFdynet2 => branch == 0,
            Architecture::TbStrfFdynet3 => true,
            _ => false,
        }
    }

    /// Branches that start with the STRF convolution front-end.
    pub fn strf_in_branch(&self, branch: usize) -> bool {
        match self {
            Architecture::Strfnet | Architecture::StrfFdynet => branch == 0,
            Architecture::TbStrfnet
            | Architecture::TbStrfFdynet1
            | Architecture::TbStrfFdynet2
            | Architecture::TbStrfFdynet3 => branch == 0,
            _ => false,
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Architecture> {
        Architecture::ALL
            .iter()
            .find(|a| a.name() == s)
            .copied()
            .ok_or_else(|| Error::UnknownArchitecture {
                name: s.to_string(),
                valid: Architecture::valid_names(),
            })
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Width/pooling presets: the full-size configuration and a desk-scale one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalePreset {
    Paper,
    Toy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub preset: ScalePreset,
    /// Output channels of the six convolution blocks.
    pub conv_widths: [usize; 6],
    /// (time, frequency) pooling of each block.
    pub pool_plan: [(usize, usize); 6],
    /// Static block convolution kernel (odd dims).
    pub conv_kernel: (usize, usize),
    pub gru_hidden: usize,
    pub n_classes: usize,
    /// Mel bins of the input features; fixes the recurrent input width.
    pub n_mels: usize,
    /// Trainable scale-rate pairs in the STRF front-end (2 kernels each).
    pub strf_pairs: usize,
    pub strf_axes: KernelAxes,
    pub fdy: FdyConfig,
    /// Seed for weight initialization.
    pub seed: u64,
}

impl ModelConfig {
    pub fn paper(architecture: Architecture, n_classes: usize) -> ModelConfig {
        ModelConfig {
            architecture,
            preset: ScalePreset::Paper,
            conv_widths: [16, 32, 64, 128, 128, 128],
            pool_plan: [(1, 2), (1, 2), (1, 2), (1, 2), (1, 2), (1, 1)],
            conv_kernel: (3, 3),
            gru_hidden: 128,
            n_classes,
            n_mels: 64,
            strf_pairs: 32,
            strf_axes: KernelAxes::default(),
            fdy: FdyConfig::default(),
            seed: 42,
        }
    }

    pub fn toy(architecture: Architecture, n_classes: usize) -> ModelConfig {
        ModelConfig {
            conv_widths: [8, 16, 32, 32, 32, 32],
            gru_hidden: 32,
            preset: ScalePreset::Toy,
            ..ModelConfig::paper(architecture, n_classes)
        }
    }

    pub fn preset(preset: ScalePreset, architecture: Architecture, n_classes: usize) -> ModelConfig {
        match preset {
            ScalePreset::Paper => ModelConfig::paper(architecture, n_classes),
            ScalePreset::Toy => ModelConfig::toy(architecture, n_classes),
        }
    }

    /// Frequency bins left after the pooling plan.
    pub fn pooled_mels(&self) -> usize {
        self.pool_plan.iter().fold(self.n_mels, |f, p| f / p.1)
    }

    /// Output frame count for a clip of `n_frames` input frames.
    pub fn output_frames(&self, n_frames: usize) -> usize {
        self.pool_plan.iter().fold(n_frames, |t, p| t / p.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 {
            return Err(Error::InvalidConfig("zero classes".into()));
        }
        if self.conv_widths.iter().any(|&w| w == 0) || self.gru_hidden == 0 {
            return Err(Error::InvalidConfig("zero-width layer".into()));
        }
        if self.pool_plan.iter().any(|p| p.0 == 0 || p.1 == 0) {
            return Err(Error::InvalidConfig("zero pool size".into()));
        }
        if self.conv_kernel.0 % 2 == 0 || self.conv_kernel.1 % 2 == 0 {
            return Err(Error::InvalidConfig("block kernel dims must be odd".into()));
        }
        if self.pooled_mels() == 0 {
            return Err(Error::InvalidConfig(format!(
                "pool plan reduces {} mel bins to zero",
                self.n_mels
            )));
        }
        if self.strf_pairs == 0 {
            return Err(Error::InvalidConfig("zero scale-rate pairs".into()));
        }
        self.strf_axes.validate()?;
        Ok(())
    }
}
