//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by any strfsed operation.
#[derive(Debug, Error)]
pub enum Error {
    /// WAV file header could not be parsed as RIFF/WAVE.
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    /// WAV codec other than PCM16 / float32.
    #[error("unsupported codec: {0}")]
    UnsupportedCodec(String),

    /// WAV file contains no samples.
    #[error("zero-length audio: {0}")]
    ZeroLengthAudio(String),

    /// Invalid DSP or model configuration.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Tensor/grid shape mismatch between operands.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Spectrum has no off-DC modulation peak (constant or empty grid).
    #[error("no peak: {0}")]
    NoPeak(String),

    /// Malformed label row; carries the 1-based line number.
    #[error("label parse error at line {line}: {msg}")]
    LabelParse { line: usize, msg: String },

    /// No class has a reference-positive segment, macro F1 undefined.
    #[error("no reference-positive segments in any class")]
    NoReferencePositives,

    /// Non-finite value where a finite one is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Checkpoint or feature blob inconsistent with its manifest.
    #[error("corrupt artifact: {0}")]
    CorruptArtifact(String),

    /// Unknown model architecture name.
    #[error("unknown architecture '{name}'; valid names: {valid}")]
    UnknownArchitecture { name: String, valid: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
