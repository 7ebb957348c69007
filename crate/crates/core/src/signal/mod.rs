//! Audio-to-feature frontend: WAV decoding, magnitude STFT and the mel
//! spectrogram configuration used by every model input.

mod blob;
mod mel;
mod stft;
mod wav;

pub use blob::{read_feature_blob, write_feature_blob, FeatureBlob};
pub use mel::{mel_filterbank, melspectrogram, Compression, MelConfig, MelSpectrogram};
pub use stft::stft_magnitude;
pub use wav::{load_wav, write_wav_mono16, Waveform};
