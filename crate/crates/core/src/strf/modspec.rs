//! Modulation-spectrum peak analysis: the verification oracle that recovers
//! (rate, scale, direction) from any spectrogram-like grid.

use super::Direction;
use crate::fft::{fft2_real_padded, next_fast_len};
use crate::{Error, Result};

/// 4x zero-padding refines the spectral grid so the reported peak location
/// is a good estimate of the continuous-spectrum peak; tolerances elsewhere
/// are still stated in bins of the unpadded grid.
const PAD_FACTOR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationPeak {
    pub rate_hz: f64,
    pub scale_cyc_per_oct: f64,
    pub direction: Direction,
}

/// Locate the dominant spectro-temporal modulation of `grid` (row-major,
/// `n_t` time rows by `n_f` frequency columns).
///
/// The grid mean is removed, the magnitude of a zero-padded 2D DFT is formed,
/// its DC row and column are zeroed, and the argmax over the positive
/// temporal-frequency half-plane is mapped back to physical units. A peak in
/// the positive spectral-frequency quadrant means downward drift; negative
/// means upward. Ties break toward the lowest linear bin index.
pub fn modulation_peak(
    grid: &[f64],
    n_t: usize,
    n_f: usize,
    time_step_s: f64,
    freq_step_oct: f64,
) -> Result<ModulationPeak> {
    if n_t < 4 || n_f < 4 {
        return Err(Error::InvalidConfig(
            "modulation analysis needs a grid of at least 4x4".into(),
        ));
    }
    if grid.len() != n_t * n_f {
        return Err(Error::ShapeMismatch(format!(
            "grid length {} != {n_t} x {n_f}",
            grid.len()
        )));
    }

    let mean = grid.iter().sum::<f64>() / grid.len() as f64;
    let centered: Vec<f64> = grid.iter().map(|v| v - mean).collect();
    let spread: f64 = centered.iter().map(|v| v.abs()).sum();

    let pad_t = next_fast_len(PAD_FACTOR * n_t);
    let pad_f = next_fast_len(PAD_FACTOR * n_f);
    let spec = fft2_real_padded(&centered, n_t, n_f, pad_t, pad_f);

    let mut best_mag = 0.0f64;
    let mut best = None;
    for r in 1..=pad_t / 2 {
        for c in 1..pad_f {
            let mag = spec[r * pad_f + c].norm();
            if mag > best_mag {
                best_mag = mag;
                best = Some((r, c));
            }
        }
    }

    let (r, c) = match best {
        Some(rc) if best_mag > 1e-9 * spread.max(f64::MIN_POSITIVE) => rc,
        _ => {
            return Err(Error::NoPeak(
                "grid has no off-DC modulation energy".into(),
            ))
        }
    };

    let rate_hz = r as f64 / (pad_t as f64 * time_step_s);
    let (scale_bins, direction) = if c <= pad_f / 2 {
        (c as f64, Direction::Down)
    } else {
        ((pad_f - c) as f64, Direction::Up)
    };
    let scale_cyc_per_oct = scale_bins / (pad_f as f64 * freq_step_oct);
    Ok(ModulationPeak {
        rate_hz,
        scale_cyc_per_oct,
        direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn on_grid_cosine_recovered_exactly() {
        // 3 cycles along time, 5 along frequency over the grid extent.
        let (n_t, n_f) = (32, 40);
        let (dt, dx) = (0.5, 0.25);
        let mut grid = vec![0.0; n_t * n_f];
        for t in 0..n_t {
            for f in 0..n_f {
                grid[t * n_f + f] =
                    (TAU * (3.0 * t as f64 / n_t as f64 + 5.0 * f as f64 / n_f as f64)).cos();
            }
        }
        let peak = modulation_peak(&grid, n_t, n_f, dt, dx).unwrap();
        let want_rate = 3.0 / (n_t as f64 * dt);
        let want_scale = 5.0 / (n_f as f64 * dx);
        assert!((peak.rate_hz - want_rate).abs() < 1e-12);
        assert!((peak.scale_cyc_per_oct - want_scale).abs() < 1e-12);
        assert_eq!(peak.direction, Direction::Down);
    }

    #[test]
    fn opposite_sign_coupling_is_upward() {
        let (n_t, n_f) = (24, 24);
        let mut grid = vec![0.0; n_t * n_f];
        for t in 0..n_t {
            for f in 0..n_f {
                grid[t * n_f + f] =
                    (TAU * (2.0 * t as f64 / n_t as f64 - 4.0 * f as f64 / n_f as f64)).cos();
            }
        }
        let peak = modulation_peak(&grid, n_t, n_f, 1.0, 1.0).unwrap();
        assert_eq!(peak.direction, Direction::Up);
        assert!((peak.rate_hz - 2.0 / 24.0).abs() < 1e-12);
        assert!((peak.scale_cyc_per_oct - 4.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_kernel_parameters_off_the_init_grid() {
        use crate::strf::{build_strf, KernelAxes, ScaleRateParam};
        let axes = KernelAxes::default();
        let k = build_strf(&ScaleRateParam::new(2.0, 0.5, Direction::Up), &axes).unwrap();
        let peak = modulation_peak(
            &k.values,
            axes.n_t,
            axes.n_f,
            axes.time_step_s,
            axes.freq_step_oct,
        )
        .unwrap();
        let rate_bin = 1.0 / (axes.n_t as f64 * axes.time_step_s);
        let scale_bin = 1.0 / (axes.n_f as f64 * axes.freq_step_oct);
        assert!((peak.rate_hz - 0.5).abs() <= rate_bin, "rate {}", peak.rate_hz);
        assert!(
            (peak.scale_cyc_per_oct - 2.0).abs() <= scale_bin,
            "scale {}",
            peak.scale_cyc_per_oct
        );
        assert_eq!(peak.direction, Direction::Up);
    }

    #[test]
    fn constant_grid_has_no_peak() {
        let grid = vec![3.25; 16 * 16];
        match modulation_peak(&grid, 16, 16, 1.0, 1.0) {
            Err(Error::NoPeak(_)) => {}
            other => panic!("expected NoPeak, got {other:?}"),
        }
        let zeros = vec![0.0; 16 * 16];
        assert!(matches!(
            modulation_peak(&zeros, 16, 16, 1.0, 1.0),
            Err(Error::NoPeak(_))
        ));
    }

    #[test]
    fn tiny_grid_rejected() {
        let grid = vec![0.0; 9];
        assert!(modulation_peak(&grid, 3, 3, 1.0, 1.0).is_err());
    }
}
