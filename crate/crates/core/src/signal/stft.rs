//! Magnitude STFT with Hann window, reflect-padded centered frames.

use super::Waveform;
use crate::fft::fft_inplace;
use crate::nn::Tensor;
use crate::{Error, Result};
use rustfft::num_complex::Complex64;

/// Reflect (no edge repeat) index mapping into [0, len).
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    if m >= len as isize {
        m = period - m;
    }
    m as usize
}

/// Hann-windowed magnitude STFT. Frame t is centered on sample `t * hop`;
/// the frame count is ceil(len / hop), independent of content. Output is
/// [n_frames, n_fft/2 + 1].
pub fn stft_magnitude(wave: &Waveform, n_fft: usize, hop: usize) -> Result<Tensor> {
    if n_fft == 0 || n_fft % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "window length {n_fft} must be even and positive"
        )));
    }
    if hop == 0 {
        return Err(Error::InvalidConfig("hop length must be positive".into()));
    }
    let len = wave.samples.len();
    if len == 0 {
        return Err(Error::ZeroLengthAudio("empty waveform".into()));
    }

    let window: Vec<f64> = (0..n_fft)
        .map(|n| 0.5 - 0.5 * (std::f64::consts::TAU * n as f64 / n_fft as f64).cos())
        .collect();

    let n_frames = len.div_ceil(hop);
    let n_bins = n_fft / 2 + 1;
    let half = (n_fft / 2) as isize;

    let mut out = Tensor::zeros(&[n_frames, n_bins]);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let center = (t * hop) as isize;
        for (n, b) in buf.iter_mut().enumerate() {
            let src = reflect_index(center - half + n as isize, len);
            *b = Complex64::new(wave.samples[src] * window[n], 0.0);
        }
        fft_inplace(&mut buf);
        let row = &mut out.data_mut()[t * n_bins..(t + 1) * n_bins];
        for (k, r) in row.iter_mut().enumerate() {
            *r = buf[k].norm();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn wave(samples: Vec<f64>, sr: u32) -> Waveform {
        Waveform {
            samples,
            sample_rate_hz: sr,
        }
    }

    #[test]
    fn zero_wave_zero_magnitudes() {
        let w = wave(vec![0.0; 1000], 8000);
        let m = stft_magnitude(&w, 256, 64).unwrap();
        assert_eq!(m.shape(), &[1000usize.div_ceil(64), 129]);
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bin_centered_sine_peaks_at_its_bin() {
        let sr = 8000u32;
        let n_fft = 256;
        let k = 12;
        let freq = k as f64 * sr as f64 / n_fft as f64;
        let samples: Vec<f64> = (0..4000)
            .map(|i| (std::f64::consts::TAU * freq * i as f64 / sr as f64).sin())
            .collect();
        let m = stft_magnitude(&wave(samples, sr), n_fft, 64).unwrap();
        let n_bins = m.shape()[1];
        // interior frames only; edges see reflected padding
        for t in 10..m.shape()[0] - 10 {
            let row = &m.data()[t * n_bins..(t + 1) * n_bins];
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, k, "frame {t}");
        }
    }

    #[test]
    fn matches_naive_dft_per_frame() {
        let mut rng = Rng::new(77);
        let samples: Vec<f64> = (0..4096).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let w = wave(samples.clone(), 8000);
        let (n_fft, hop) = (512, 128);
        let m = stft_magnitude(&w, n_fft, hop).unwrap();

        let window: Vec<f64> = (0..n_fft)
            .map(|n| 0.5 - 0.5 * (std::f64::consts::TAU * n as f64 / n_fft as f64).cos())
            .collect();
        let n_bins = n_fft / 2 + 1;
        let mut max_diff = 0.0f64;
        for t in 0..m.shape()[0] {
            let center = (t * hop) as isize;
            let frame: Vec<f64> = (0..n_fft)
                .map(|n| {
                    let src = reflect_index(center - (n_fft / 2) as isize + n as isize, 4096);
                    samples[src] * window[n]
                })
                .collect();
            for k in 0..n_bins {
                let mut re = 0.0;
                let mut im = 0.0;
                for (n, &x) in frame.iter().enumerate() {
                    let ang = -std::f64::consts::TAU * (k * n) as f64 / n_fft as f64;
                    re += x * ang.cos();
                    im += x * ang.sin();
                }
                let naive = (re * re + im * im).sqrt();
                max_diff = max_diff.max((naive - m.at2(t, k)).abs());
            }
        }
        assert!(max_diff < 1e-6, "max diff vs naive DFT: {max_diff}");
    }

    #[test]
    fn odd_n_fft_and_zero_hop_rejected() {
        let w = wave(vec![1.0; 100], 8000);
        assert!(stft_magnitude(&w, 255, 64).is_err());
        assert!(stft_magnitude(&w, 256, 0).is_err());
    }

    #[test]
    fn frame_count_depends_only_on_length_and_hop() {
        let a = wave(vec![0.3; 1001], 8000);
        let b = wave((0..1001).map(|i| (i as f64).sin()).collect(), 8000);
        let ma = stft_magnitude(&a, 128, 50).unwrap();
        let mb = stft_magnitude(&b, 128, 50).unwrap();
        assert_eq!(ma.shape()[0], mb.shape()[0]);
        assert_eq!(ma.shape()[0], 21); // ceil(1001 / 50)
    }

    #[test]
    fn short_signals_still_frame() {
        let w = wave(vec![0.5], 8000);
        let m = stft_magnitude(&w, 64, 16).unwrap();
        assert_eq!(m.shape()[0], 1);
        assert!(m.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn reflect_indexing() {
        // len 4: ... 2 1 | 0 1 2 3 | 2 1 0 1 ...
        assert_eq!(reflect_index(-1, 4), 1);
        assert_eq!(reflect_index(-2, 4), 2);
        assert_eq!(reflect_index(0, 4), 0);
        assert_eq!(reflect_index(3, 4), 3);
        assert_eq!(reflect_index(4, 4), 2);
        assert_eq!(reflect_index(5, 4), 1);
        assert_eq!(reflect_index(6, 4), 0);
        assert_eq!(reflect_index(7, 4), 1);
        assert_eq!(reflect_index(-7, 1), 0);
    }
}
