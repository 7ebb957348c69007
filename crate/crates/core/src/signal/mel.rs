//! Mel spectrogram features.
//!
//! HTK mel scale, triangular filters peak-normalized then L1-normalized per
//! row, applied to the magnitude STFT. Defaults follow the 44.1 kHz / 0.2 s
//! frame configuration the models are trained on: window 17640, hop 8820,
//! 64 mel bins.

use super::{stft_magnitude, Waveform};
use crate::nn::Tensor;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compression {
    /// ln(1 + x); keeps features nonnegative with no floor parameter.
    Log1p,
    /// 20 log10(max(x, 1e-10)).
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub compression: Compression,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            n_fft: 17640,
            hop: 8820,
            n_mels: 64,
            fmin_hz: 0.0,
            fmax_hz: 22050.0,
            compression: Compression::Log1p,
        }
    }
}

impl MelConfig {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        if self.hop == 0 {
            return Err(Error::InvalidConfig("hop must be positive".into()));
        }
        if self.n_fft < self.hop {
            return Err(Error::InvalidConfig(format!(
                "window {} shorter than hop {}",
                self.n_fft, self.hop
            )));
        }
        if self.n_mels == 0 {
            return Err(Error::InvalidConfig("n_mels must be at least 1".into()));
        }
        let nyquist = sample_rate_hz as f64 / 2.0;
        if !(0.0 <= self.fmin_hz && self.fmin_hz < self.fmax_hz && self.fmax_hz <= nyquist) {
            return Err(Error::InvalidConfig(format!(
                "mel band [{}, {}] Hz invalid for Nyquist {nyquist} Hz",
                self.fmin_hz, self.fmax_hz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MelSpectrogram {
    /// [n_frames, n_mels].
    pub values: Tensor,
    pub frame_period_s: f64,
    pub config: MelConfig,
}

impl MelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn n_mels(&self) -> usize {
        self.values.shape()[1]
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filterbank matrix, [n_mels, n_fft/2 + 1] row-major. Triangles
/// are evaluated on continuous bin frequencies, peak 1, then each row is
/// divided by its sum. A row whose triangle falls between bins gets a single
/// unit weight at the bin nearest its center so no mel band is silent.
pub fn mel_filterbank(
    n_mels: usize,
    n_fft: usize,
    sample_rate_hz: u32,
    fmin_hz: f64,
    fmax_hz: f64,
) -> Vec<f64> {
    let n_bins = n_fft / 2 + 1;
    let mel_lo = hz_to_mel(fmin_hz);
    let mel_hi = hz_to_mel(fmax_hz);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let bin_hz = sample_rate_hz as f64 / n_fft as f64;
    let mut filters = vec![0.0; n_mels * n_bins];
    for m in 0..n_mels {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = &mut filters[m * n_bins..(m + 1) * n_bins];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let rising = if center > lo { (f - lo) / (center - lo) } else { -1.0 };
            let falling = if hi > center { (hi - f) / (hi - center) } else { -1.0 };
            *w = rising.min(falling).max(0.0);
        }
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for w in row.iter_mut() {
                *w /= sum;
            }
        } else {
            let nearest = (center / bin_hz).round().clamp(0.0, (n_bins - 1) as f64) as usize;
            row[nearest] = 1.0;
        }
    }
    filters
}

pub fn melspectrogram(wave: &Waveform, cfg: &MelConfig) -> Result<MelSpectrogram> {
    cfg.validate(wave.sample_rate_hz)?;
    let mag = stft_magnitude(wave, cfg.n_fft, cfg.hop)?;
    let n_frames = mag.shape()[0];
    let n_bins = mag.shape()[1];
    let filters = mel_filterbank(
        cfg.n_mels,
        cfg.n_fft,
        wave.sample_rate_hz,
        cfg.fmin_hz,
        cfg.fmax_hz,
    );

    let mut values = Tensor::zeros(&[n_frames, cfg.n_mels]);
    for t in 0..n_frames {
        let spec = &mag.data()[t * n_bins..(t + 1) * n_bins];
        let row = &mut values.data_mut()[t * cfg.n_mels..(t + 1) * cfg.n_mels];
        for (m, out) in row.iter_mut().enumerate() {
            let filt = &filters[m * n_bins..(m + 1) * n_bins];
            let energy: f64 = filt.iter().zip(spec).map(|(w, s)| w * s).sum();
            *out = match cfg.compression {
                Compression::Log1p => energy.ln_1p(),
                Compression::Db => 20.0 * energy.max(1e-10).log10(),
            };
        }
    }
    values.check_finite("mel spectrogram")?;
    Ok(MelSpectrogram {
        values,
        frame_period_s: cfg.hop as f64 / wave.sample_rate_hz as f64,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn noise_wave(len: usize, sr: u32, seed: u64) -> Waveform {
        let mut rng = Rng::new(seed);
        Waveform {
            samples: (0..len).map(|_| rng.uniform(-0.9, 0.9)).collect(),
            sample_rate_hz: sr,
        }
    }

    #[test]
    fn paper_rate_config_gives_five_frames_per_second() {
        // 180 s at 44.1 kHz with hop 8820 -> 900 frames, 0.2 s apart.
        // A flat synthetic signal keeps this test fast.
        let wave = Waveform {
            samples: vec![0.1; 44100 * 180],
            sample_rate_hz: 44100,
        };
        let cfg = MelConfig::default();
        let mel = melspectrogram(&wave, &cfg).unwrap();
        assert_eq!(mel.n_frames(), 900);
        assert_eq!(mel.n_mels(), 64);
        assert!((mel.frame_period_s - 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_wave_log1p_is_all_zero() {
        let wave = Waveform {
            samples: vec![0.0; 8000],
            sample_rate_hz: 8000,
        };
        let cfg = MelConfig {
            n_fft: 512,
            hop: 256,
            n_mels: 16,
            fmin_hz: 0.0,
            fmax_hz: 4000.0,
            compression: Compression::Log1p,
        };
        let mel = melspectrogram(&wave, &cfg).unwrap();
        assert!(mel.values.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_noise_reaches_every_mel_bin() {
        let wave = noise_wave(16000, 8000, 9);
        let cfg = MelConfig {
            n_fft: 512,
            hop: 128,
            n_mels: 24,
            fmin_hz: 0.0,
            fmax_hz: 4000.0,
            compression: Compression::Log1p,
        };
        let mel = melspectrogram(&wave, &cfg).unwrap();
        // independently constructed filterbank: every row must carry weight
        let filters = mel_filterbank(24, 512, 8000, 0.0, 4000.0);
        for m in 0..24 {
            let row_sum: f64 = filters[m * 257..(m + 1) * 257].iter().sum();
            assert!(row_sum > 0.0, "mel row {m} is silent");
        }
        for t in 0..mel.n_frames() {
            for m in 0..24 {
                assert!(mel.values.at2(t, m) > 0.0, "frame {t} mel {m}");
            }
        }
    }

    #[test]
    fn filterbank_covers_interior_bins() {
        let (n_mels, n_fft, sr) = (16, 256, 8000u32);
        let (fmin, fmax) = (100.0, 3500.0);
        let filters = mel_filterbank(n_mels, n_fft, sr, fmin, fmax);
        let n_bins = n_fft / 2 + 1;
        let bin_hz = sr as f64 / n_fft as f64;
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            if f > fmin && f < fmax {
                let col_weight: f64 = (0..n_mels).map(|m| filters[m * n_bins + k]).sum();
                assert!(col_weight > 0.0, "bin {k} at {f} Hz uncovered");
            }
        }
    }

    #[test]
    fn amplitude_scaling_is_monotone() {
        let wave = noise_wave(4000, 8000, 10);
        let scaled = Waveform {
            samples: wave.samples.iter().map(|s| s * 1.8).collect(),
            sample_rate_hz: 8000,
        };
        let cfg = MelConfig {
            n_fft: 256,
            hop: 128,
            n_mels: 12,
            fmin_hz: 0.0,
            fmax_hz: 4000.0,
            compression: Compression::Log1p,
        };
        let a = melspectrogram(&wave, &cfg).unwrap();
        let b = melspectrogram(&scaled, &cfg).unwrap();
        for (x, y) in a.values.data().iter().zip(b.values.data()) {
            assert!(y >= x);
        }
    }

    #[test]
    fn fmax_above_nyquist_rejected() {
        let wave = noise_wave(1000, 8000, 11);
        let cfg = MelConfig {
            n_fft: 256,
            hop: 128,
            n_mels: 12,
            fmin_hz: 0.0,
            fmax_hz: 4001.0,
            compression: Compression::Log1p,
        };
        assert!(melspectrogram(&wave, &cfg).is_err());
    }

    #[test]
    fn db_compression_available() {
        let wave = noise_wave(2000, 8000, 12);
        let cfg = MelConfig {
            n_fft: 256,
            hop: 128,
            n_mels: 12,
            fmin_hz: 0.0,
            fmax_hz: 4000.0,
            compression: Compression::Db,
        };
        let mel = melspectrogram(&wave, &cfg).unwrap();
        assert!(mel.values.is_finite());
    }
}
