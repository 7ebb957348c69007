//! Feature blob dump: little-endian float32 row-major values plus a JSON
//! sidecar carrying the grid dimensions and frame period. A blob written at
//! `<stem>.f32` pairs with `<stem>.json`.

use crate::nn::Tensor;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureBlob {
    pub n_frames: usize,
    pub n_mels: usize,
    pub frame_period_s: f64,
}

pub fn blob_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("f32"), stem.with_extension("json"))
}

/// Write `values` ([n_frames, n_mels]) as f32 bytes plus the sidecar.
pub fn write_feature_blob(stem: &Path, values: &Tensor, frame_period_s: f64) -> Result<()> {
    let shape = values.shape();
    if shape.len() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "feature blob expects 2D values, got {shape:?}"
        )));
    }
    let (bin_path, json_path) = blob_paths(stem);
    let mut bytes = Vec::with_capacity(values.numel() * 4);
    for &v in values.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(bin_path, bytes)?;
    let sidecar = FeatureBlob {
        n_frames: shape[0],
        n_mels: shape[1],
        frame_period_s,
    };
    std::fs::write(json_path, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Read a blob back; values are widened to f64.
pub fn read_feature_blob(stem: &Path) -> Result<(Tensor, FeatureBlob)> {
    let (bin_path, json_path) = blob_paths(stem);
    let sidecar: FeatureBlob = serde_json::from_str(&std::fs::read_to_string(&json_path)?)?;
    let bytes = std::fs::read(&bin_path)?;
    let expect = sidecar.n_frames * sidecar.n_mels * 4;
    if bytes.len() != expect {
        return Err(Error::CorruptArtifact(format!(
            "{}: {} bytes, sidecar promises {expect}",
            bin_path.display(),
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((
        Tensor::from_vec(&[sidecar.n_frames, sidecar.n_mels], data),
        sidecar,
    ))
}
