//! Property tests for the contracts that hold over whole input families.

use proptest::prelude::*;
use strfsed::data::make_folds;
use strfsed::eval::{default_threshold_grid, f1_mo, SegmentScores};
use strfsed::fdy::{fdy_attention, FdyConfig, FdyLayer};
use strfsed::nn::Tensor;
use strfsed::rng::Rng;
use strfsed::signal::{melspectrogram, stft_magnitude, Compression, MelConfig, Waveform};

fn segment_scores(vals: Vec<f64>, n_classes: usize) -> SegmentScores {
    let n = vals.len() / n_classes;
    SegmentScores {
        scores: Tensor::from_vec(&[n, n_classes], vals),
        segment_length_s: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Scaling a waveform up never decreases any mel cell (log1p is
    /// monotone over nonnegative energies).
    #[test]
    fn mel_monotone_under_amplitude_scaling(
        seed in 0u64..1000,
        gain in 1.01f64..4.0,
        len in 300usize..900,
    ) {
        let mut rng = Rng::new(seed);
        let samples: Vec<f64> = (0..len).map(|_| rng.uniform(-0.2, 0.2)).collect();
        let wave = Waveform { samples: samples.clone(), sample_rate_hz: 8000 };
        let scaled = Waveform {
            samples: samples.iter().map(|s| s * gain).collect(),
            sample_rate_hz: 8000,
        };
        let cfg = MelConfig {
            n_fft: 64,
            hop: 32,
            n_mels: 8,
            fmin_hz: 0.0,
            fmax_hz: 4000.0,
            compression: Compression::Log1p,
        };
        let a = melspectrogram(&wave, &cfg).unwrap();
        let b = melspectrogram(&scaled, &cfg).unwrap();
        for (x, y) in a.values.data().iter().zip(b.values.data()) {
            prop_assert!(y >= x);
        }
    }

    /// Frame count depends only on sample count and hop, never on content.
    #[test]
    fn stft_frame_count_is_content_free(
        seed in 0u64..1000,
        len in 50usize..2000,
        hop in 1usize..200,
    ) {
        let mut rng = Rng::new(seed);
        let noisy = Waveform {
            samples: (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            sample_rate_hz: 8000,
        };
        let flat = Waveform { samples: vec![0.25; len], sample_rate_hz: 8000 };
        let a = stft_magnitude(&noisy, 32, hop).unwrap();
        let b = stft_magnitude(&flat, 32, hop).unwrap();
        prop_assert_eq!(a.shape()[0], b.shape()[0]);
        prop_assert_eq!(a.shape()[0], len.div_ceil(hop));
    }

    /// Folds partition the file set with sizes differing by at most one,
    /// identically for identical seeds.
    #[test]
    fn folds_partition_with_balanced_sizes(
        n_files in 5usize..60,
        k in 2usize..5,
        seed in 0u64..1000,
    ) {
        let files: Vec<String> = (0..n_files).map(|i| format!("f{i:03}")).collect();
        let plan = make_folds(&files, k, seed).unwrap();
        let again = make_folds(&files, k, seed).unwrap();
        prop_assert_eq!(&plan.assignment, &again.assignment);
        prop_assert_eq!(plan.assignment.len(), n_files);
        let mut sizes = vec![0usize; k];
        for &f in plan.assignment.values() {
            prop_assert!(f < k);
            sizes[f] += 1;
        }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
    }

    /// At threshold 1.0 nothing is predicted positive, and the optimal
    /// threshold never scores below a fixed 0.5 threshold.
    #[test]
    fn f1_threshold_semantics(seed in 0u64..2000, n_segments in 2usize..24) {
        let mut rng = Rng::new(seed);
        let preds: Vec<f64> = (0..n_segments).map(|_| rng.next_f64()).collect();
        let mut refs: Vec<f64> = (0..n_segments)
            .map(|_| if rng.next_f64() < 0.5 { 1.0 } else { 0.0 })
            .collect();
        refs[0] = 1.0;
        let classes = vec!["c".to_string()];
        let p = vec![segment_scores(preds, 1)];
        let r = vec![segment_scores(refs, 1)];
        let at_one = f1_mo(&p, &r, &classes, &[1.0]).unwrap();
        prop_assert_eq!(at_one.per_class[0].f1, 0.0);
        prop_assert_eq!(at_one.per_class[0].tp, 0);

        let opt = f1_mo(&p, &r, &classes, &default_threshold_grid()).unwrap();
        let fixed = f1_mo(&p, &r, &classes, &[0.5]).unwrap();
        prop_assert!(opt.per_class[0].f1 >= fixed.per_class[0].f1);
    }

    /// Attention rows are simplex vectors for arbitrary inputs and layers.
    #[test]
    fn fdy_attention_rows_always_normalize(
        seed in 0u64..1000,
        c_in in 1usize..4,
        t_len in 1usize..6,
        f_len in 1usize..10,
        k in 1usize..5,
    ) {
        let mut rng = Rng::new(seed);
        let layer = FdyLayer::new(
            c_in,
            2,
            3,
            3,
            &FdyConfig { n_basis: k, hidden: Some(3), temperature: 1.0 },
            &mut rng,
        )
        .unwrap();
        let n = c_in * t_len * f_len;
        let input = Tensor::from_vec(
            &[c_in, t_len, f_len],
            (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect(),
        );
        let w = fdy_attention(&input, &layer).unwrap();
        for f in 0..f_len {
            let row = &w.data()[f * k..(f + 1) * k];
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    /// Label files round-trip through write and parse.
    #[test]
    fn labels_round_trip(seed in 0u64..1000, n_events in 1usize..12) {
        use std::collections::BTreeMap;
        use strfsed::eval::Event;

        let mut rng = Rng::new(seed);
        let mut by_file: BTreeMap<String, Vec<Event>> = BTreeMap::new();
        for i in 0..n_events {
            let onset = rng.uniform(0.0, 50.0);
            let event = Event {
                onset_s: onset,
                offset_s: onset + rng.uniform(0.01, 10.0),
                label: format!("class{}", rng.below(3)),
                confidence: (rng.below(100) as f64 + 1.0) / 100.0,
            };
            by_file
                .entry(format!("clip_{:02}", i % 4))
                .or_default()
                .push(event);
        }
        let dir = std::env::temp_dir().join("strfsed_prop_labels");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("labels_{seed}_{n_events}.csv"));
        strfsed::data::write_labels(&path, &by_file).unwrap();
        let parsed = strfsed::data::parse_labels(&path, true).unwrap();
        std::fs::remove_file(&path).ok();

        prop_assert_eq!(parsed.by_file.len(), by_file.len());
        for (file, events) in &by_file {
            let got = &parsed.by_file[file];
            prop_assert_eq!(got.len(), events.len());
            for (a, b) in events.iter().zip(got) {
                prop_assert!((a.onset_s - b.onset_s).abs() < 1e-6);
                prop_assert!((a.offset_s - b.offset_s).abs() < 1e-6);
                prop_assert_eq!(&a.label, &b.label);
                prop_assert!((a.confidence - b.confidence).abs() < 1e-6);
            }
        }
    }
}

/// Concurrent feature extraction is bit-identical to the serial result.
#[test]
fn parallel_mel_extraction_is_bit_identical() {
    let cfg = MelConfig {
        n_fft: 128,
        hop: 64,
        n_mels: 12,
        fmin_hz: 0.0,
        fmax_hz: 4000.0,
        compression: Compression::Log1p,
    };
    let waves: Vec<Waveform> = (0..4)
        .map(|i| {
            let mut rng = Rng::new(900 + i);
            Waveform {
                samples: (0..4000).map(|_| rng.uniform(-0.8, 0.8)).collect(),
                sample_rate_hz: 8000,
            }
        })
        .collect();
    let serial: Vec<Vec<f64>> = waves
        .iter()
        .map(|w| melspectrogram(w, &cfg).unwrap().values.data().to_vec())
        .collect();
    let parallel: Vec<Vec<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = waves
            .iter()
            .map(|w| scope.spawn(|| melspectrogram(w, &cfg).unwrap().values.data().to_vec()))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(serial, parallel);
}
