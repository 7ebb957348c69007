//! Segment-based evaluation: macro-average F1 with a per-class optimal
//! decision threshold chosen over a fixed grid.
//!
//! Threshold semantics: a segment is predicted positive iff score > theta
//! (strict), so theta = 1.0 yields no positives. Ties between thresholds
//! attaining a class's best F1 resolve to the lowest grid value. TP/FP/FN
//! accumulate across files within a class (micro) before the per-class F1;
//! classes with no reference-positive segment are excluded from the macro
//! mean.

use crate::nn::Tensor;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// One labeled event; file identity is carried by the per-file containers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub onset_s: f64,
    pub offset_s: f64,
    pub label: String,
    pub confidence: f64,
}

/// Per-segment class scores in [0, 1]; binary 0/1 for references.
#[derive(Debug, Clone)]
pub struct SegmentScores {
    /// [n_segments, n_classes].
    pub scores: Tensor,
    pub segment_length_s: f64,
}

impl SegmentScores {
    pub fn n_segments(&self) -> usize {
        self.scores.shape()[0]
    }

    pub fn n_classes(&self) -> usize {
        self.scores.shape()[1]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: String,
    pub threshold: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct F1Report {
    pub per_class: Vec<ClassReport>,
    /// Mean F1 over classes holding at least one reference-positive segment.
    pub macro_f1: f64,
}

impl F1Report {
    /// Plain-text table for terminal output.
    pub fn to_table_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<20} {:>9} {:>8} {:>8} {:>8} {:>8}\n",
            "class", "threshold", "f1", "tp", "fp", "fn"
        ));
        for c in &self.per_class {
            out.push_str(&format!(
                "{:<20} {:>9.2} {:>8.4} {:>8} {:>8} {:>8}\n",
                c.label, c.threshold, c.f1, c.tp, c.fp, c.fn_
            ));
        }
        out.push_str(&format!("macro F1: {:.4}\n", self.macro_f1));
        out
    }
}

/// The grid 0.00, 0.02, ..., 1.00.
pub fn default_threshold_grid() -> Vec<f64> {
    (0..=50).map(|i| i as f64 * 0.02).collect()
}

/// Binary reference roll: a segment is active for a class iff it intersects
/// an event of that class with strictly positive overlap length.
pub fn rasterize_reference(
    events: &[Event],
    duration_s: f64,
    classes: &[String],
    segment_length_s: f64,
) -> Result<SegmentScores> {
    if segment_length_s <= 0.0 || duration_s <= 0.0 {
        return Err(Error::InvalidConfig("non-positive duration or segment".into()));
    }
    let n_segments = (duration_s / segment_length_s).ceil() as usize;
    let n_classes = classes.len();
    let mut scores = Tensor::zeros(&[n_segments, n_classes]);
    for ev in events {
        let class = classes
            .iter()
            .position(|c| c == &ev.label)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown class label '{}'", ev.label)))?;
        for s in 0..n_segments {
            let seg_lo = s as f64 * segment_length_s;
            let seg_hi = seg_lo + segment_length_s;
            let overlap = ev.offset_s.min(seg_hi) - ev.onset_s.max(seg_lo);
            if overlap > 0.0 {
                let idx = scores.ix2(s, class);
                scores.data_mut()[idx] = 1.0;
            }
        }
    }
    Ok(SegmentScores {
        scores,
        segment_length_s,
    })
}

/// Segment score = max frame probability among frames whose centers fall in
/// the segment; a segment without frame centers carries the previous
/// segment's scores (zero for a first empty segment).
pub fn rasterize_predictions(
    frame_probs: &Tensor,
    frame_period_s: f64,
    segment_length_s: f64,
) -> Result<SegmentScores> {
    let (n_frames, n_classes) = match frame_probs.shape() {
        [t, c] => (*t, *c),
        s => return Err(Error::ShapeMismatch(format!("frame probs {s:?}"))),
    };
    if frame_period_s <= 0.0 || segment_length_s <= 0.0 {
        return Err(Error::InvalidConfig("non-positive periods".into()));
    }
    let duration = n_frames as f64 * frame_period_s;
    let n_segments = (duration / segment_length_s).ceil() as usize;
    let mut scores = Tensor::zeros(&[n_segments, n_classes]);
    let mut filled = vec![false; n_segments];
    for t in 0..n_frames {
        let center = (t as f64 + 0.5) * frame_period_s;
        let seg = ((center / segment_length_s).floor() as usize).min(n_segments - 1);
        filled[seg] = true;
        for c in 0..n_classes {
            let idx = scores.ix2(seg, c);
            let v = frame_probs.at2(t, c);
            if v > scores.data()[idx] {
                scores.data_mut()[idx] = v;
            }
        }
    }
    for s in 1..n_segments {
        if !filled[s] {
            let prev: Vec<f64> =
                scores.data()[(s - 1) * n_classes..s * n_classes].to_vec();
            scores.data_mut()[s * n_classes..(s + 1) * n_classes].copy_from_slice(&prev);
        }
    }
    Ok(SegmentScores {
        scores,
        segment_length_s,
    })
}

/// Macro-average F1 with per-class optimal thresholds over `grid`.
pub fn f1_mo(
    preds: &[SegmentScores],
    refs: &[SegmentScores],
    classes: &[String],
    grid: &[f64],
) -> Result<F1Report> {
    if preds.len() != refs.len() || preds.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} prediction files vs {} reference files",
            preds.len(),
            refs.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty threshold grid".into()));
    }
    let n_classes = classes.len();
    for (p, r) in preds.iter().zip(refs) {
        if p.scores.shape() != r.scores.shape() || p.n_classes() != n_classes {
            return Err(Error::ShapeMismatch(format!(
                "segment grids {:?} vs {:?} (classes {n_classes})",
                p.scores.shape(),
                r.scores.shape()
            )));
        }
    }

    let mut per_class = Vec::with_capacity(n_classes);
    let mut macro_sum = 0.0;
    let mut macro_count = 0usize;
    for (c, label) in classes.iter().enumerate() {
        let mut ref_positives = 0u64;
        for r in refs {
            for s in 0..r.n_segments() {
                if r.scores.at2(s, c) > 0.5 {
                    ref_positives += 1;
                }
            }
        }

        let mut best = (f64::NEG_INFINITY, 0.0, 0u64, 0u64, 0u64);
        for &theta in grid {
            let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
            for (p, r) in preds.iter().zip(refs) {
                for s in 0..p.n_segments() {
                    let predicted = p.scores.at2(s, c) > theta;
                    let actual = r.scores.at2(s, c) > 0.5;
                    match (predicted, actual) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fn_ += 1,
                        (false, false) => {}
                    }
                }
            }
            let denom = 2 * tp + fp + fn_;
            let f1 = if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            };
            if f1 > best.0 {
                best = (f1, theta, tp, fp, fn_);
            }
        }

        if ref_positives > 0 {
            macro_sum += best.0;
            macro_count += 1;
        }
        per_class.push(ClassReport {
            label: label.clone(),
            threshold: best.1,
            f1: best.0,
            tp: best.2,
            fp: best.3,
            fn_: best.4,
        });
    }

    if macro_count == 0 {
        return Err(Error::NoReferencePositives);
    }
    Ok(F1Report {
        per_class,
        macro_f1: macro_sum / macro_count as f64,
    })
}

/// Unweighted mean and sample standard deviation of macro F1 across reports.
pub fn aggregate_folds(reports: &[F1Report]) -> Result<(f64, f64)> {
    if reports.is_empty() {
        return Err(Error::InvalidConfig("no reports to aggregate".into()));
    }
    let n = reports.len() as f64;
    let mean = reports.iter().map(|r| r.macro_f1).sum::<f64>() / n;
    let std = if reports.len() == 1 {
        0.0
    } else {
        (reports
            .iter()
            .map(|r| (r.macro_f1 - mean) * (r.macro_f1 - mean))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    };
    Ok((mean, std))
}
