//! Spectro-temporal receptive field (STRF) kernels.
//!
//! An STRF is a 2D time/log-frequency kernel parameterized by a spectral
//! modulation density (scale, cycles per octave), a temporal modulation
//! frequency (rate, Hz) and a drift direction. Kernels are synthesized from
//! those parameters rather than trained tap-by-tap, so a convolution layer
//! built on them carries two trainable scalars per kernel pair.

mod conv;
mod io;
mod kernel;
mod modspec;
mod ripple;

pub use conv::{strf_conv_forward, strf_input_grad, strf_param_grad, PairGrad, StrfConv};
pub use io::{write_bank_manifest, write_kernel_csv, write_kernel_pgm};
pub use kernel::{build_bank, build_strf, default_init_params};
pub use modspec::{modulation_peak, ModulationPeak};
pub use ripple::{ripple_stimulus, RippleParams, RippleStimulus};

use serde::{Deserialize, Serialize};

/// Drift direction of the spectral peaks over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Spectral content rises over time.
    Up,
    /// Spectral content falls over time.
    Down,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Up => write!(f, "up"),
            Direction::Down => write!(f, "down"),
        }
    }
}

/// One trainable (log scale, log rate) pair plus direction. The log
/// parameterization keeps scale and rate strictly positive without clamping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRateParam {
    pub log_scale: f64,
    pub log_rate: f64,
    pub direction: Direction,
}

impl ScaleRateParam {
    pub fn new(scale_cyc_per_oct: f64, rate_hz: f64, direction: Direction) -> Self {
        assert!(scale_cyc_per_oct > 0.0 && rate_hz > 0.0);
        ScaleRateParam {
            log_scale: scale_cyc_per_oct.ln(),
            log_rate: rate_hz.ln(),
            direction,
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn rate(&self) -> f64 {
        self.log_rate.exp()
    }
}

/// Sampling grid of a kernel: time taps run causally from 0, frequency taps
/// are centered on the kernel's center frequency (CF) in octave units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelAxes {
    pub n_t: usize,
    pub n_f: usize,
    pub time_step_s: f64,
    pub freq_step_oct: f64,
}

impl Default for KernelAxes {
    /// 50 x 48 taps; 0.2 s per tap (the mel frame period) and 1/24 octave per
    /// tap so the 48 frequency taps span two octaves around the CF.
    fn default() -> Self {
        KernelAxes {
            n_t: 50,
            n_f: 48,
            time_step_s: 0.2,
            freq_step_oct: 1.0 / 24.0,
        }
    }
}

impl KernelAxes {
    pub fn validate(&self) -> crate::Result<()> {
        if self.n_t < 2 || self.n_f < 2 {
            return Err(crate::Error::InvalidConfig(
                "kernel axes need at least 2 taps per dimension".into(),
            ));
        }
        if !(self.time_step_s > 0.0) || !(self.freq_step_oct > 0.0) {
            return Err(crate::Error::InvalidConfig(
                "kernel tap steps must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Frequency offset of tap `k` from the CF, in octaves. The grid is
    /// symmetric about 0 so tap `n_f-1-k` mirrors tap `k`.
    pub fn freq_offset_oct(&self, k: usize) -> f64 {
        (k as f64 - (self.n_f as f64 - 1.0) / 2.0) * self.freq_step_oct
    }

    /// Time of tap `i`, seconds.
    pub fn time_s(&self, i: usize) -> f64 {
        i as f64 * self.time_step_s
    }
}

/// A sampled, unit-L2-norm STRF kernel (row-major, time x frequency).
#[derive(Debug, Clone)]
pub struct StrfKernel {
    pub values: Vec<f64>,
    pub axes: KernelAxes,
    pub param: ScaleRateParam,
}

impl StrfKernel {
    pub fn at(&self, t: usize, f: usize) -> f64 {
        self.values[t * self.axes.n_f + f]
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A bank of kernels: each trainable pair realized in both directions.
/// Kernel order is all up-direction kernels in pair order, then all down.
#[derive(Debug, Clone)]
pub struct StrfBank {
    pub params: Vec<ScaleRateParam>,
    pub kernels: Vec<StrfKernel>,
    pub axes: KernelAxes,
}

impl StrfBank {
    pub fn n_pairs(&self) -> usize {
        self.params.len()
    }

    pub fn n_kernels(&self) -> usize {
        self.kernels.len()
    }

    /// Index of the kernel for `pair` in `direction`.
    pub fn kernel_index(&self, pair: usize, direction: Direction) -> usize {
        match direction {
            Direction::Up => pair,
            Direction::Down => self.n_pairs() + pair,
        }
    }
}
