//! Auditory-model sound event detection.
//!
//! The crate builds the full pipeline from audio to event scores:
//!
//! * [`signal`] — WAV loading, STFT and mel-spectrogram features.
//! * [`strf`] — spectro-temporal receptive field kernels synthesized from
//!   trainable (scale, rate) pairs, ripple stimuli and modulation-spectrum
//!   verification, plus the differentiable STRF convolution.
//! * [`fdy`] — frequency-dynamic convolution (per-frequency attention over a
//!   basis of kernels).
//! * [`nn`] — the tensor / layer / optimizer substrate used by the models.
//! * [`models`] — the nine CRNN-style architectures, training loop and
//!   checkpoint I/O.
//! * [`eval`] — segment-based macro F1 with per-class optimal thresholds.
//! * [`data`] — label parsing, fold splitting and the synthetic ripple
//!   corpus for desk-scale end-to-end runs.
//! * [`verify`] — the fast self-check suites behind the CLI's `verify`
//!   subcommand.

pub mod data;
pub mod error;
pub mod eval;
pub mod fdy;
pub mod fft;
pub mod models;
pub mod nn;
pub mod rng;
pub mod signal;
pub mod strf;
pub mod verify;

pub use error::{Error, Result};
