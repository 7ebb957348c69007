//! Dataset plumbing: delimited label files, frame-level soft targets,
//! cross-validation folds and the synthetic ripple-event corpus used for
//! desk-scale end-to-end runs.

mod folds;
mod labels;
mod synth;
mod targets;

pub use folds::{make_folds, FoldPlan};
pub use labels::{parse_labels, write_labels, LabelSet};
pub use synth::{
    generate_corpus, load_corpus, write_corpus, ClassSpec, SynthClip, SynthCorpus, SynthSpec,
};
pub use targets::frame_targets;
