//! Parametric synthetic coughs and labeled corpora with exact ground truth.

mod corpus;
mod cough;
mod noise;
mod score;

pub use corpus::{
    clip_id, synth_clip, synth_clips, synth_corpus, ClampedNormal, ClassProfile, ClipTruth, CorpusSummary, SynthClip,
    TruthCough,
};
pub use cough::{
    synth_cough, CoughSynthesisParams, SynthCough, VoicedTail, MAX_COUGH_MS, PHASE1_MS, PHASE2_MS, PHASE3_MS,
    VOICED_F0_HZ,
};
pub use noise::{band_noise, pink_noise};
pub use score::{score_clips, CorpusScore, MATCH_MIN_IOU};
