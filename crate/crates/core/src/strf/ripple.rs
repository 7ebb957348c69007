//! Ripple stimuli: drifting sinusoidal spectra on a log-frequency grid, the
//! stimulus family STRF kernels are tuned to.

use super::Direction;
use crate::{Error, Result};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy)]
pub struct RippleParams {
    pub omega_hz: f64,
    pub scale_cyc_per_oct: f64,
    pub direction: Direction,
    /// Modulation depth in [0, 1].
    pub amplitude: f64,
    /// Phase offset, radians.
    pub phase: f64,
}

#[derive(Debug, Clone)]
pub struct RippleStimulus {
    /// Row-major [n_frames x n_bins], nonnegative envelope 1 + A cos(...).
    pub values: Vec<f64>,
    pub n_frames: usize,
    pub n_bins: usize,
    pub params: RippleParams,
    pub frame_period_s: f64,
    pub bins_per_octave: f64,
}

/// values[t][x] = 1 + A cos(2π (ω t Δt + s Ω x Δx) + φ), with s = +1 for
/// downward and -1 for upward drift.
pub fn ripple_stimulus(
    params: &RippleParams,
    n_frames: usize,
    n_bins: usize,
    frame_period_s: f64,
    bins_per_octave: f64,
) -> Result<RippleStimulus> {
    if !(0.0..=1.0).contains(&params.amplitude) {
        return Err(Error::InvalidConfig(format!(
            "ripple amplitude {} outside [0, 1]",
            params.amplitude
        )));
    }
    if n_frames == 0 || n_bins == 0 || frame_period_s <= 0.0 || bins_per_octave <= 0.0 {
        return Err(Error::InvalidConfig("empty or degenerate ripple grid".into()));
    }
    let rate_nyquist = 0.5 / frame_period_s;
    let scale_nyquist = 0.5 * bins_per_octave;
    if params.omega_hz >= rate_nyquist || params.omega_hz < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "ripple rate {} Hz at or above the {rate_nyquist} Hz Nyquist",
            params.omega_hz
        )));
    }
    if params.scale_cyc_per_oct >= scale_nyquist || params.scale_cyc_per_oct < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "ripple scale {} cyc/oct at or above the {scale_nyquist} cyc/oct Nyquist",
            params.scale_cyc_per_oct
        )));
    }

    let sgn = match params.direction {
        Direction::Down => 1.0,
        Direction::Up => -1.0,
    };
    let dx = 1.0 / bins_per_octave;
    let mut values = vec![0.0; n_frames * n_bins];
    for t in 0..n_frames {
        let t_phase = params.omega_hz * t as f64 * frame_period_s;
        for x in 0..n_bins {
            let x_phase = sgn * params.scale_cyc_per_oct * x as f64 * dx;
            values[t * n_bins + x] =
                1.0 + params.amplitude * (TAU * (t_phase + x_phase) + params.phase).cos();
        }
    }
    Ok(RippleStimulus {
        values,
        n_frames,
        n_bins,
        params: *params,
        frame_period_s,
        bins_per_octave,
    })
}
