//! RIFF WAV decoding. PCM 16-bit and 32-bit float are accepted; stereo is
//! averaged down to mono.

use crate::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Waveform {
    /// Mono samples, nominally in [-1, 1].
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl Waveform {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

pub fn load_wav(path: &Path) -> Result<Waveform> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::MalformedHeader(format!(
            "{}: {io}",
            path.display()
        )),
        other => Error::MalformedHeader(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.channels == 0 {
        return Err(Error::MalformedHeader(format!(
            "{}: zero channels",
            path.display()
        )));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MalformedHeader(format!("{}: {e}", path.display())))?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MalformedHeader(format!("{}: {e}", path.display())))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedCodec(format!(
                "{}: {bits}-bit {fmt:?} (only 16-bit PCM and 32-bit float)",
                path.display()
            )))
        }
    };

    if interleaved.is_empty() {
        return Err(Error::ZeroLengthAudio(path.display().to_string()));
    }

    let channels = spec.channels as usize;
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks(channels)
            .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
            .collect()
    };

    for &s in &samples {
        if !s.is_finite() {
            return Err(Error::NonFinite(format!(
                "{}: non-finite sample",
                path.display()
            )));
        }
    }

    Ok(Waveform {
        samples,
        sample_rate_hz: spec.sample_rate,
    })
}

/// Write a mono 16-bit PCM WAV; handy for fixtures and round trips.
pub fn write_wav_mono16(path: &Path, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    for &s in samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer
            .write_sample(v)
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    writer
        .finalize()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(())
}
