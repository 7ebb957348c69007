//! Checkpoints: a JSON manifest naming every parameter and state buffer with
//! shape metadata, next to a little-endian binary blob. Offsets must tile
//! the blob exactly and a load-after-save reproduces the parameters bit for
//! bit (values are stored as f64; f32 blobs are accepted on read).

use super::{Architecture, ModelConfig, ModelGraph};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

const FORMAT: &str = "strfsed-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    /// Element count.
    len: usize,
    /// Element offset into the blob.
    offset: usize,
    dtype: String,
    kind: String, // "param" | "buffer"
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    architecture: String,
    config: ModelConfig,
    params: Vec<ManifestEntry>,
    /// Total element count of the blob.
    blob_len: usize,
}

pub fn checkpoint_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

pub fn save_checkpoint(model: &mut ModelGraph, stem: &Path) -> Result<()> {
    let (json_path, bin_path) = checkpoint_paths(stem);
    let mut entries = Vec::new();
    let mut blob: Vec<u8> = Vec::new();
    let mut offset = 0usize;

    let config = model.config.clone();
    for p in model.params_mut() {
        entries.push(ManifestEntry {
            name: p.name.clone(),
            len: p.value.numel(),
            offset,
            dtype: "f64".into(),
            kind: "param".into(),
        });
        for &v in p.value.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        offset += p.value.numel();
    }
    for b in model.buffers_mut() {
        entries.push(ManifestEntry {
            name: b.name.clone(),
            len: b.value.len(),
            offset,
            dtype: "f64".into(),
            kind: "buffer".into(),
        });
        for &v in b.value.iter() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        offset += b.value.len();
    }

    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        architecture: config.architecture.name().into(),
        config,
        params: entries,
        blob_len: offset,
    };
    std::fs::write(&json_path, serde_json::to_string_pretty(&manifest)?)?;
    std::fs::write(&bin_path, blob)?;
    Ok(())
}

pub fn load_checkpoint(stem: &Path) -> Result<ModelGraph> {
    let (json_path, bin_path) = checkpoint_paths(stem);
    let raw = std::fs::read_to_string(&json_path)?;
    // surface an unknown architecture tag as its own error before strict
    // config parsing
    let probe: serde_json::Value = serde_json::from_str(&raw)?;
    if probe.get("format").and_then(|v| v.as_str()) != Some(FORMAT) {
        return Err(Error::CorruptArtifact(format!(
            "{}: not a {FORMAT} manifest",
            json_path.display()
        )));
    }
    if let Some(arch) = probe.get("architecture").and_then(|v| v.as_str()) {
        Architecture::from_str(arch)?;
    }
    let manifest: Manifest = serde_json::from_str(&raw)?;

    // offsets must tile the blob exactly
    let mut sorted: Vec<(usize, usize)> = manifest.params.iter().map(|e| (e.offset, e.len)).collect();
    sorted.sort_unstable();
    let mut cursor = 0usize;
    for (off, len) in &sorted {
        if *off != cursor {
            return Err(Error::CorruptArtifact(format!(
                "manifest gap or overlap at element offset {off}"
            )));
        }
        cursor += len;
    }
    if cursor != manifest.blob_len {
        return Err(Error::CorruptArtifact(format!(
            "manifest covers {cursor} elements, blob_len says {}",
            manifest.blob_len
        )));
    }

    let bytes = std::fs::read(&bin_path)?;
    let values = decode_blob(&bytes, &manifest, &bin_path)?;

    let mut model = ModelGraph::build(&manifest.config)?;
    let mut by_name: std::collections::BTreeMap<&str, &ManifestEntry> = manifest
        .params
        .iter()
        .map(|e| (e.name.as_str(), e))
        .collect();
    for p in model.params_mut() {
        let entry = by_name.remove(p.name.as_str()).ok_or_else(|| {
            Error::CorruptArtifact(format!("manifest missing parameter '{}'", p.name))
        })?;
        if entry.len != p.value.numel() {
            return Err(Error::CorruptArtifact(format!(
                "parameter '{}' has {} elements, manifest says {}",
                p.name,
                p.value.numel(),
                entry.len
            )));
        }
        p.value
            .data_mut()
            .copy_from_slice(&values[entry.offset..entry.offset + entry.len]);
    }
    for b in model.buffers_mut() {
        let entry = by_name.remove(b.name.as_str()).ok_or_else(|| {
            Error::CorruptArtifact(format!("manifest missing buffer '{}'", b.name))
        })?;
        if entry.len != b.value.len() {
            return Err(Error::CorruptArtifact(format!("buffer '{}' length", b.name)));
        }
        b.value
            .copy_from_slice(&values[entry.offset..entry.offset + entry.len]);
    }
    if let Some(stale) = by_name.keys().next() {
        return Err(Error::CorruptArtifact(format!(
            "manifest entry '{stale}' does not exist in a rebuilt model"
        )));
    }
    Ok(model)
}

fn decode_blob(bytes: &[u8], manifest: &Manifest, bin_path: &Path) -> Result<Vec<f64>> {
    let dtype = manifest
        .params
        .first()
        .map(|e| e.dtype.clone())
        .unwrap_or_else(|| "f64".into());
    for e in &manifest.params {
        if e.dtype != dtype {
            return Err(Error::CorruptArtifact("mixed dtypes in manifest".into()));
        }
    }
    let elem = match dtype.as_str() {
        "f64" => 8,
        "f32" => 4,
        other => {
            return Err(Error::CorruptArtifact(format!(
                "unsupported checkpoint dtype '{other}'"
            )))
        }
    };
    if bytes.len() != manifest.blob_len * elem {
        return Err(Error::CorruptArtifact(format!(
            "{}: {} bytes, manifest promises {}",
            bin_path.display(),
            bytes.len(),
            manifest.blob_len * elem
        )));
    }
    Ok(match dtype.as_str() {
        "f64" => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        _ => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Architecture, ModelConfig};
    use crate::nn::Tensor;
    use crate::rng::Rng;

    fn tmp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("strfsed_ckpt_tests").join(name);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn tiny_config() -> ModelConfig {
        let mut cfg = ModelConfig::toy(Architecture::TbStrfnet, 2);
        cfg.conv_widths = [2, 2, 2, 2, 2, 2];
        cfg.gru_hidden = 2;
        cfg.n_mels = 32;
        cfg
    }

    #[test]
    fn round_trip_is_bit_exact_and_forward_identical() {
        let dir = tmp_dir("rt");
        let stem = dir.join("model");
        let cfg = tiny_config();
        let mut model = ModelGraph::build(&cfg).unwrap();
        let mut rng = Rng::new(3);
        let mel = Tensor::from_vec(
            &[8, 32],
            (0..8 * 32).map(|_| rng.uniform(0.0, 1.0)).collect(),
        );
        let before = model.forward_batch(&[mel.clone()], false).unwrap();

        save_checkpoint(&mut model, &stem).unwrap();
        let mut restored = load_checkpoint(&stem).unwrap();
        let after = restored.forward_batch(&[mel], false).unwrap();
        assert_eq!(before[0].data(), after[0].data());

        // underlying parameters identical bit for bit
        let a: Vec<f64> = model
            .params_mut()
            .iter_mut()
            .flat_map(|p| p.value.data().to_vec())
            .collect();
        let b: Vec<f64> = restored
            .params_mut()
            .iter_mut()
            .flat_map(|p| p.value.data().to_vec())
            .collect();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn truncated_blob_is_rejected() {
        let dir = tmp_dir("trunc");
        let stem = dir.join("model");
        let mut model = ModelGraph::build(&tiny_config()).unwrap();
        save_checkpoint(&mut model, &stem).unwrap();
        let (_, bin) = checkpoint_paths(&stem);
        let mut bytes = std::fs::read(&bin).unwrap();
        bytes.truncate(bytes.len() - 9);
        std::fs::write(&bin, bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&stem),
            Err(Error::CorruptArtifact(_))
        ));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn manifest_offsets_tile_blob() {
        let dir = tmp_dir("tile");
        let stem = dir.join("model");
        let mut model = ModelGraph::build(&tiny_config()).unwrap();
        save_checkpoint(&mut model, &stem).unwrap();
        let (json, bin) = checkpoint_paths(&stem);
        let manifest: Manifest =
            serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        let total: usize = manifest.params.iter().map(|e| e.len).sum();
        assert_eq!(total, manifest.blob_len);
        assert_eq!(std::fs::read(bin).unwrap().len(), 8 * total);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unknown_architecture_tag_is_explicit() {
        let dir = tmp_dir("arch");
        let stem = dir.join("model");
        let mut model = ModelGraph::build(&tiny_config()).unwrap();
        save_checkpoint(&mut model, &stem).unwrap();
        let (json, _) = checkpoint_paths(&stem);
        let text = std::fs::read_to_string(&json)
            .unwrap()
            .replace("tb-strfnet", "super-net");
        std::fs::write(&json, text).unwrap();
        match load_checkpoint(&stem) {
            Err(Error::UnknownArchitecture { name, valid }) => {
                assert_eq!(name, "super-net");
                assert!(valid.contains("tb-strfnet"));
            }
            Err(other) => panic!("expected UnknownArchitecture, got {other:?}"),
            Ok(_) => panic!("expected UnknownArchitecture, load succeeded"),
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
