//! Synthetic ripple-event corpus generated directly in mel-spectrogram
//! space: smoothed-noise background plus additive ripple patches whose
//! spectral modulation density identifies the class. Everything derives
//! from one seed, so a corpus is reproducible bit for bit.

use super::labels::{parse_labels, write_labels};
use crate::eval::Event;
use crate::fft::next_fast_len;
use crate::nn::Tensor;
use crate::rng::Rng;
use crate::signal::{read_feature_blob, write_feature_blob};
use crate::strf::{ripple_stimulus, Direction, RippleParams};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    /// Scale range in cycles/octave; ranges must be pairwise disjoint.
    pub scale_range: (f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_clips: usize,
    pub clip_seconds: f64,
    pub classes: Vec<ClassSpec>,
    /// Temporal modulation range shared by all classes, Hz.
    pub rate_range: (f64, f64),
    pub events_min: usize,
    pub events_max: usize,
    /// Event duration range, seconds.
    pub event_seconds: (f64, f64),
    /// Event AC energy over background energy, dB.
    pub snr_db: f64,
    pub seed: u64,
    pub n_mels: usize,
    pub frame_period_s: f64,
    pub bins_per_octave: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_clips: 60,
            clip_seconds: 30.0,
            classes: vec![
                ClassSpec {
                    name: "scale_low".into(),
                    scale_range: (0.3, 0.7),
                },
                ClassSpec {
                    name: "scale_mid".into(),
                    scale_range: (1.5, 2.5),
                },
                ClassSpec {
                    name: "scale_high".into(),
                    scale_range: (4.0, 6.0),
                },
            ],
            rate_range: (0.5, 2.0),
            events_min: 3,
            events_max: 6,
            event_seconds: (2.0, 5.0),
            snr_db: 6.0,
            seed: 42,
            n_mels: 64,
            frame_period_s: 0.2,
            bins_per_octave: 24.0,
        }
    }
}

impl SynthSpec {
    pub fn n_frames(&self) -> usize {
        (self.clip_seconds / self.frame_period_s).round() as usize
    }

    pub fn class_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.classes.iter().map(|c| c.name.clone()).collect();
        names.sort();
        names
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clips == 0 || self.classes.is_empty() {
            return Err(Error::InvalidConfig("empty corpus spec".into()));
        }
        if self.events_min > self.events_max {
            return Err(Error::InvalidConfig("events_min > events_max".into()));
        }
        if !(self.event_seconds.0 > 0.0 && self.event_seconds.0 <= self.event_seconds.1) {
            return Err(Error::InvalidConfig("bad event duration range".into()));
        }
        if self.event_seconds.1 > self.clip_seconds {
            return Err(Error::InvalidConfig("events longer than clips".into()));
        }
        let scale_nyquist = self.bins_per_octave / 2.0;
        let rate_nyquist = 0.5 / self.frame_period_s;
        let mut ranges: Vec<(f64, f64)> = self.classes.iter().map(|c| c.scale_range).collect();
        ranges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (i, r) in ranges.iter().enumerate() {
            if !(0.0 < r.0 && r.0 < r.1 && r.1 < scale_nyquist) {
                return Err(Error::InvalidConfig(format!(
                    "scale range {r:?} invalid for Nyquist {scale_nyquist}"
                )));
            }
            if i > 0 && ranges[i - 1].1 >= r.0 {
                return Err(Error::InvalidConfig(format!(
                    "class scale ranges overlap: {:?} and {r:?}",
                    ranges[i - 1]
                )));
            }
        }
        if !(0.0 < self.rate_range.0
            && self.rate_range.0 < self.rate_range.1
            && self.rate_range.1 < rate_nyquist)
        {
            return Err(Error::InvalidConfig(format!(
                "rate range {:?} invalid for Nyquist {rate_nyquist}",
                self.rate_range
            )));
        }
        Ok(())
    }

    /// Half of a zero-padded spectrum bin: modulation draws keep this margin
    /// inside their range so peak recovery lands inside the range too.
    fn scale_margin(&self) -> f64 {
        0.5 * self.bins_per_octave / next_fast_len(4 * self.n_mels) as f64
    }

    fn rate_margin(&self) -> f64 {
        let min_frames = (self.event_seconds.0 / self.frame_period_s).floor().max(2.0) as usize;
        0.5 / (next_fast_len(4 * min_frames) as f64 * self.frame_period_s)
    }
}

#[derive(Debug, Clone)]
pub struct SynthClip {
    pub id: String,
    /// [n_frames, n_mels].
    pub features: Tensor,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    /// Sorted class vocabulary.
    pub classes: Vec<String>,
    pub clips: Vec<SynthClip>,
}

const BACKGROUND_BASE: f64 = 0.5;
const BACKGROUND_STD: f64 = 0.1;

fn smoothed_background(n_frames: usize, n_mels: usize, rng: &mut Rng) -> Tensor {
    let mut grid = Tensor::zeros(&[n_frames, n_mels]);
    for v in grid.data_mut() {
        *v = rng.next_gaussian();
    }
    // two 3x3 box passes give the noise a gentle spatial correlation
    for _ in 0..2 {
        let src = grid.clone();
        for t in 0..n_frames {
            for f in 0..n_mels {
                let mut acc = 0.0;
                let mut cnt = 0.0;
                for dt in -1i64..=1 {
                    for df in -1i64..=1 {
                        let tt = t as i64 + dt;
                        let ff = f as i64 + df;
                        if tt < 0 || ff < 0 || tt >= n_frames as i64 || ff >= n_mels as i64 {
                            continue;
                        }
                        acc += src.at2(tt as usize, ff as usize);
                        cnt += 1.0;
                    }
                }
                let idx = grid.ix2(t, f);
                grid.data_mut()[idx] = acc / cnt;
            }
        }
    }
    // renormalize to the target std, then lift onto the positive base level
    let mean: f64 = grid.data().iter().sum::<f64>() / grid.numel() as f64;
    let var: f64 =
        grid.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / grid.numel() as f64;
    let scale = BACKGROUND_STD / var.sqrt().max(1e-12);
    for v in grid.data_mut() {
        *v = (BACKGROUND_BASE + (*v - mean) * scale).max(0.0);
    }
    grid
}

pub fn generate_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let n_frames = spec.n_frames();
    let classes = spec.class_names();
    let root = Rng::new(spec.seed);
    let scale_margin = spec.scale_margin();
    let rate_margin = spec.rate_margin();
    for c in &spec.classes {
        if c.scale_range.0 + scale_margin >= c.scale_range.1 - scale_margin {
            return Err(Error::InvalidConfig(format!(
                "scale range {:?} narrower than twice the draw margin {scale_margin}",
                c.scale_range
            )));
        }
    }
    if spec.rate_range.0 + rate_margin >= spec.rate_range.1 - rate_margin {
        return Err(Error::InvalidConfig("rate range narrower than draw margins".into()));
    }

    let mut clips = Vec::with_capacity(spec.n_clips);
    for clip_idx in 0..spec.n_clips {
        let mut rng = root.derive(clip_idx as u64 + 1);
        let mut features = smoothed_background(n_frames, spec.n_mels, &mut rng);
        let ac_rms_target = 10f64.powf(spec.snr_db / 20.0) * BACKGROUND_STD;

        let n_events = spec.events_min + rng.below(spec.events_max - spec.events_min + 1);
        let mut occupied: Vec<(usize, usize)> = Vec::new(); // [start, end) frames
        let mut events = Vec::new();
        for _ in 0..n_events {
            let dur_s = rng.uniform(spec.event_seconds.0, spec.event_seconds.1);
            let dur = ((dur_s / spec.frame_period_s).round() as usize).clamp(2, n_frames);
            // place without overlap, one guard frame between events
            let mut placed = None;
            for _ in 0..60 {
                let onset = rng.below(n_frames - dur + 1);
                let clear = occupied
                    .iter()
                    .all(|&(s, e)| onset + dur + 1 <= s || onset >= e + 1);
                if clear {
                    placed = Some(onset);
                    break;
                }
            }
            let Some(onset) = placed else { continue };
            occupied.push((onset, onset + dur));

            let class_idx = rng.below(spec.classes.len());
            let class = &spec.classes[class_idx];
            let scale = rng.uniform(
                class.scale_range.0 + scale_margin,
                class.scale_range.1 - scale_margin,
            );
            let rate = rng.uniform(
                spec.rate_range.0 + rate_margin,
                spec.rate_range.1 - rate_margin,
            );
            let direction = if rng.below(2) == 0 {
                Direction::Up
            } else {
                Direction::Down
            };
            let amplitude = rng.uniform(0.7, 1.0);
            let phase = rng.uniform(0.0, std::f64::consts::TAU);
            let patch = ripple_stimulus(
                &RippleParams {
                    omega_hz: rate,
                    scale_cyc_per_oct: scale,
                    direction,
                    amplitude,
                    phase,
                },
                dur,
                spec.n_mels,
                spec.frame_period_s,
                spec.bins_per_octave,
            )?;
            // gain so the ripple's AC part carries the requested energy over
            // the background (cosine rms = A / sqrt(2))
            let gain = ac_rms_target * std::f64::consts::SQRT_2 / amplitude;
            for t in 0..dur {
                for f in 0..spec.n_mels {
                    let idx = features.ix2(onset + t, f);
                    features.data_mut()[idx] += gain * patch.values[t * spec.n_mels + f];
                }
            }
            events.push(Event {
                onset_s: onset as f64 * spec.frame_period_s,
                offset_s: (onset + dur) as f64 * spec.frame_period_s,
                label: class.name.clone(),
                confidence: 1.0,
            });
        }
        events.sort_by(|a, b| a.onset_s.partial_cmp(&b.onset_s).unwrap());
        clips.push(SynthClip {
            id: format!("clip_{clip_idx:03}"),
            features,
            events,
        });
    }
    Ok(SynthCorpus {
        spec: spec.clone(),
        classes,
        clips,
    })
}

#[derive(Serialize, Deserialize)]
struct CorpusManifest {
    spec: SynthSpec,
    classes: Vec<String>,
    files: Vec<String>,
}

/// Lay the corpus out on disk: one feature blob per clip, `labels.csv` and
/// a `corpus.json` manifest echoing the generator settings.
pub fn write_corpus(corpus: &SynthCorpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut by_file: BTreeMap<String, Vec<Event>> = BTreeMap::new();
    let mut files = Vec::new();
    for clip in &corpus.clips {
        write_feature_blob(
            &dir.join(&clip.id),
            &clip.features,
            corpus.spec.frame_period_s,
        )?;
        files.push(clip.id.clone());
        by_file.insert(clip.id.clone(), clip.events.clone());
    }
    write_labels(&dir.join("labels.csv"), &by_file)?;
    let manifest = CorpusManifest {
        spec: corpus.spec.clone(),
        classes: corpus.classes.clone(),
        files,
    };
    std::fs::write(
        dir.join("corpus.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Read a corpus back; feature values carry f32 blob precision.
pub fn load_corpus(dir: &Path) -> Result<SynthCorpus> {
    let manifest: CorpusManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("corpus.json"))?)?;
    let labels = parse_labels(&dir.join("labels.csv"), true)?;
    let mut clips = Vec::with_capacity(manifest.files.len());
    for id in &manifest.files {
        let (features, blob) = read_feature_blob(&dir.join(id))?;
        if (blob.frame_period_s - manifest.spec.frame_period_s).abs() > 1e-9 {
            return Err(Error::CorruptArtifact(format!(
                "{id}: frame period {} vs corpus {}",
                blob.frame_period_s, manifest.spec.frame_period_s
            )));
        }
        clips.push(SynthClip {
            id: id.clone(),
            features,
            events: labels.by_file.get(id).cloned().unwrap_or_default(),
        });
    }
    Ok(SynthCorpus {
        spec: manifest.spec,
        classes: manifest.classes,
        clips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strf::modulation_peak;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            n_clips: 6,
            clip_seconds: 20.0,
            seed: 7,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn zero_events_gives_background_only() {
        let spec = SynthSpec {
            events_min: 0,
            events_max: 0,
            n_clips: 2,
            ..small_spec()
        };
        let corpus = generate_corpus(&spec).unwrap();
        for clip in &corpus.clips {
            assert!(clip.events.is_empty());
            assert!(clip.features.data().iter().all(|&v| v >= 0.0));
            assert_eq!(clip.features.shape(), &[100, 64]);
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let spec = small_spec();
        let a = generate_corpus(&spec).unwrap();
        let b = generate_corpus(&spec).unwrap();
        for (ca, cb) in a.clips.iter().zip(&b.clips) {
            assert_eq!(ca.features.data(), cb.features.data());
            assert_eq!(ca.events, cb.events);
        }
    }

    #[test]
    fn events_do_not_overlap_within_a_clip() {
        let corpus = generate_corpus(&small_spec()).unwrap();
        for clip in &corpus.clips {
            for w in clip.events.windows(2) {
                assert!(w[0].offset_s <= w[1].onset_s + 1e-9);
            }
        }
    }

    #[test]
    fn modulation_peak_recovers_class_ranges() {
        let spec = SynthSpec {
            n_clips: 12,
            ..small_spec()
        };
        let corpus = generate_corpus(&spec).unwrap();
        let mut total = 0;
        let mut hits = 0;
        for clip in &corpus.clips {
            for ev in &clip.events {
                total += 1;
                let first = (ev.onset_s / spec.frame_period_s).round() as usize;
                let last = (ev.offset_s / spec.frame_period_s).round() as usize;
                let dur = last - first;
                let mut patch = vec![0.0; dur * spec.n_mels];
                for t in 0..dur {
                    for f in 0..spec.n_mels {
                        patch[t * spec.n_mels + f] = clip.features.at2(first + t, f);
                    }
                }
                let peak = modulation_peak(
                    &patch,
                    dur,
                    spec.n_mels,
                    spec.frame_period_s,
                    1.0 / spec.bins_per_octave,
                )
                .unwrap();
                let class = spec.classes.iter().find(|c| c.name == ev.label).unwrap();
                let scale_ok = peak.scale_cyc_per_oct >= class.scale_range.0
                    && peak.scale_cyc_per_oct <= class.scale_range.1;
                let rate_ok = peak.rate_hz >= spec.rate_range.0
                    && peak.rate_hz <= spec.rate_range.1;
                if scale_ok && rate_ok {
                    hits += 1;
                }
            }
        }
        assert!(total > 20, "too few events generated ({total})");
        assert!(
            hits * 100 >= total * 95,
            "recovered {hits}/{total} events inside their class ranges"
        );
    }

    #[test]
    fn corpus_round_trips_through_disk() {
        let dir = std::env::temp_dir().join("strfsed_corpus_rt");
        std::fs::remove_dir_all(&dir).ok();
        let corpus = generate_corpus(&small_spec()).unwrap();
        write_corpus(&corpus, &dir).unwrap();
        let loaded = load_corpus(&dir).unwrap();
        assert_eq!(loaded.classes, corpus.classes);
        assert_eq!(loaded.clips.len(), corpus.clips.len());
        for (a, b) in corpus.clips.iter().zip(&loaded.clips) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.events.len(), b.events.len());
            for (ea, eb) in a.events.iter().zip(&b.events) {
                assert!((ea.onset_s - eb.onset_s).abs() < 1e-6);
                assert!((ea.offset_s - eb.offset_s).abs() < 1e-6);
                assert_eq!(ea.label, eb.label);
            }
            for (va, vb) in a.features.data().iter().zip(b.features.data()) {
                assert_eq!(*va as f32, *vb as f32);
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn overlapping_class_ranges_rejected() {
        let mut spec = small_spec();
        spec.classes[1].scale_range = (0.5, 2.0);
        assert!(matches!(
            generate_corpus(&spec),
            Err(Error::InvalidConfig(_))
        ));
    }
}
