//! Shared corpus-to-model plumbing for the train/eval/predict commands.

use strfsed::data::{frame_targets, make_folds, SynthClip, SynthCorpus};
use strfsed::eval::{rasterize_predictions, rasterize_reference, SegmentScores};
use strfsed::models::{ModelConfig, ModelGraph, TrainItem};
use strfsed::nn::Tensor;
use strfsed::Result;

pub const SEGMENT_LENGTH_S: f64 = 1.0;

/// Split clip indices by the fold plan (same seed as training reproduces the
/// same split).
pub fn split_corpus(
    corpus: &SynthCorpus,
    folds: usize,
    held_out: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let ids: Vec<String> = corpus.clips.iter().map(|c| c.id.clone()).collect();
    let plan = make_folds(&ids, folds, seed)?;
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        if plan.assignment[id] == held_out {
            eval.push(i);
        } else {
            train.push(i);
        }
    }
    Ok((train, eval))
}

/// Build training items: features plus frame targets aligned to the model's
/// output frame rate.
pub fn train_items(
    corpus: &SynthCorpus,
    indices: &[usize],
    config: &ModelConfig,
) -> Result<Vec<TrainItem>> {
    indices
        .iter()
        .map(|&i| {
            let clip = &corpus.clips[i];
            let n_frames = clip.features.shape()[0];
            let out_frames = config.output_frames(n_frames);
            let out_period =
                corpus.spec.frame_period_s * n_frames as f64 / out_frames as f64;
            let targets = frame_targets(&clip.events, out_frames, out_period, &corpus.classes)?;
            Ok(TrainItem {
                features: clip.features.clone(),
                targets,
            })
        })
        .collect()
}

/// Eval-mode frame probabilities for one clip.
pub fn predict_clip(model: &mut ModelGraph, features: &Tensor) -> Result<Tensor> {
    Ok(model.forward_batch(&[features.clone()], false)?.remove(0))
}

/// Segment scores and binary references for a set of clips.
pub fn segment_pairs(
    model: &mut ModelGraph,
    corpus: &SynthCorpus,
    indices: &[usize],
) -> Result<(Vec<SegmentScores>, Vec<SegmentScores>)> {
    let mut preds = Vec::with_capacity(indices.len());
    let mut refs = Vec::with_capacity(indices.len());
    for &i in indices {
        let clip: &SynthClip = &corpus.clips[i];
        let n_frames = clip.features.shape()[0];
        let probs = predict_clip(model, &clip.features)?;
        let out_frames = probs.shape()[0];
        let out_period = corpus.spec.frame_period_s * n_frames as f64 / out_frames as f64;
        preds.push(rasterize_predictions(&probs, out_period, SEGMENT_LENGTH_S)?);
        let duration = n_frames as f64 * corpus.spec.frame_period_s;
        refs.push(rasterize_reference(
            &clip.events,
            duration,
            &corpus.classes,
            SEGMENT_LENGTH_S,
        )?);
    }
    Ok((preds, refs))
}

/// Held-out macro F1 of the current model state.
pub fn heldout_macro_f1(
    model: &mut ModelGraph,
    corpus: &SynthCorpus,
    indices: &[usize],
) -> Result<f64> {
    let (preds, refs) = segment_pairs(model, corpus, indices)?;
    let report = strfsed::eval::f1_mo(
        &preds,
        &refs,
        &corpus.classes,
        &strfsed::eval::default_threshold_grid(),
    )?;
    Ok(report.macro_f1)
}
