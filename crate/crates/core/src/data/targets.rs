//! Frame-level soft targets rasterized from event lists.

use crate::eval::Event;
use crate::nn::Tensor;
use crate::{Error, Result};

/// target[t][c] = max confidence over events of class c overlapping frame
/// t's interval [t dt, (t+1) dt), zero otherwise.
pub fn frame_targets(
    events: &[Event],
    n_frames: usize,
    frame_period_s: f64,
    classes: &[String],
) -> Result<Tensor> {
    if frame_period_s <= 0.0 {
        return Err(Error::InvalidConfig("non-positive frame period".into()));
    }
    let n_classes = classes.len();
    let mut out = Tensor::zeros(&[n_frames, n_classes]);
    for ev in events {
        let class = classes
            .iter()
            .position(|c| c == &ev.label)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown class label '{}'", ev.label)))?;
        let first = (ev.onset_s / frame_period_s).floor().max(0.0) as usize;
        let last = (ev.offset_s / frame_period_s).ceil() as usize;
        for t in first..last.min(n_frames) {
            let frame_lo = t as f64 * frame_period_s;
            let frame_hi = frame_lo + frame_period_s;
            if ev.onset_s < frame_hi && ev.offset_s > frame_lo {
                let idx = out.ix2(t, class);
                if ev.confidence > out.data()[idx] {
                    out.data_mut()[idx] = ev.confidence;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(onset: f64, offset: f64, label: &str, conf: f64) -> Event {
        Event {
            onset_s: onset,
            offset_s: offset,
            label: label.into(),
            confidence: conf,
        }
    }

    fn cls() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn no_events_all_zero() {
        let t = frame_targets(&[], 10, 0.2, &cls()).unwrap();
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_clip_event_fills_column() {
        let t = frame_targets(&[ev(0.0, 2.0, "b", 0.8)], 10, 0.2, &cls()).unwrap();
        for f in 0..10 {
            assert_eq!(t.at2(f, 0), 0.0);
            assert_eq!(t.at2(f, 1), 0.8);
        }
    }

    #[test]
    fn overlapping_events_take_max_confidence() {
        let events = vec![ev(0.0, 1.0, "a", 0.3), ev(0.4, 0.8, "a", 0.9)];
        let t = frame_targets(&events, 5, 0.2, &cls()).unwrap();
        assert_eq!(t.at2(0, 0), 0.3);
        assert_eq!(t.at2(1, 0), 0.3); // [0.2, 0.4): only the first event
        assert_eq!(t.at2(2, 0), 0.9);
        assert_eq!(t.at2(3, 0), 0.9);
        assert_eq!(t.at2(4, 0), 0.3); // [0.8, 1.0): first event only
    }

    #[test]
    fn target_nonzero_iff_event_overlaps_frame() {
        let events = vec![ev(0.45, 0.95, "a", 1.0)];
        let t = frame_targets(&events, 8, 0.2, &cls()).unwrap();
        for f in 0..8 {
            let frame_lo = f as f64 * 0.2;
            let frame_hi = frame_lo + 0.2;
            let overlaps = 0.45 < frame_hi && 0.95 > frame_lo;
            assert_eq!(t.at2(f, 0) > 0.0, overlaps, "frame {f}");
        }
    }

    #[test]
    fn unknown_class_rejected() {
        assert!(frame_targets(&[ev(0.0, 1.0, "zzz", 1.0)], 5, 0.2, &cls()).is_err());
    }
}
