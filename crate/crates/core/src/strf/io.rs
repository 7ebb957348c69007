//! Kernel dumps for visual inspection: per-kernel CSV and 8-bit PGM, plus a
//! JSON manifest describing the bank.

use super::{StrfBank, StrfKernel};
use crate::Result;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// CSV layout: one row per time tap, one column per frequency tap.
pub fn write_kernel_csv(kernel: &StrfKernel, path: &Path) -> Result<()> {
    let mut out = String::new();
    for t in 0..kernel.axes.n_t {
        for f in 0..kernel.axes.n_f {
            if f > 0 {
                out.push(',');
            }
            out.push_str(&format!("{:.9e}", kernel.at(t, f)));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Binary PGM (P5), min-max normalized to 0..255. Width is the time axis,
/// height the frequency axis with the highest frequency on the top row, the
/// usual orientation for receptive-field plots.
pub fn write_kernel_pgm(kernel: &StrfKernel, path: &Path) -> Result<()> {
    let (n_t, n_f) = (kernel.axes.n_t, kernel.axes.n_f);
    let lo = kernel.values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = kernel.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let mut file = std::fs::File::create(path)?;
    write!(file, "P5\n{n_t} {n_f}\n255\n")?;
    let mut pixels = Vec::with_capacity(n_t * n_f);
    for row in 0..n_f {
        let f = n_f - 1 - row;
        for t in 0..n_t {
            let v = (kernel.at(t, f) - lo) / span;
            pixels.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    file.write_all(&pixels)?;
    Ok(())
}

#[derive(Serialize)]
struct ManifestEntry {
    index: usize,
    scale_cyc_per_oct: f64,
    rate_hz: f64,
    direction: String,
}

/// JSON manifest listing every kernel's index, scale, rate and direction.
pub fn write_bank_manifest(bank: &StrfBank, path: &Path) -> Result<()> {
    let entries: Vec<ManifestEntry> = bank
        .kernels
        .iter()
        .enumerate()
        .map(|(index, k)| ManifestEntry {
            index,
            scale_cyc_per_oct: k.param.scale(),
            rate_hz: k.param.rate(),
            direction: k.param.direction.to_string(),
        })
        .collect();
    let json = serde_json::to_string_pretty(&entries)?;
    std::fs::write(path, json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strf::{build_bank, Direction, KernelAxes, ScaleRateParam};

    #[test]
    fn dumps_round_trip_shapes() {
        let dir = std::env::temp_dir().join("strfsed_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let axes = KernelAxes::default();
        let bank =
            build_bank(&[ScaleRateParam::new(1.0, 1.0, Direction::Down)], &axes).unwrap();

        let csv_path = dir.join("k0.csv");
        write_kernel_csv(&bank.kernels[0], &csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().count(), 50);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 48);

        let pgm_path = dir.join("k0.pgm");
        write_kernel_pgm(&bank.kernels[0], &pgm_path).unwrap();
        let bytes = std::fs::read(&pgm_path).unwrap();
        assert!(bytes.starts_with(b"P5\n50 48\n255\n"));
        assert_eq!(bytes.len(), b"P5\n50 48\n255\n".len() + 50 * 48);

        let man_path = dir.join("bank.json");
        write_bank_manifest(&bank, &man_path).unwrap();
        let parsed: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&man_path).unwrap()).unwrap();
        assert_eq!(parsed.as_array().unwrap().len(), 2);
        std::fs::remove_dir_all(&dir).ok();
    }
}
