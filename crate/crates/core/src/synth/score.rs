//! Scores detection and wet/dry labelling against synthetic ground truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::SynthClip;
use crate::detect::{
    classify_wet_dry, detect_coughs, score_detections, DetectionScore, DetectorConfig, Interval, WetDryLabel,
};
use crate::error::Result;

/// Minimum IoU for a detection to count as finding a true cough.
pub const MATCH_MIN_IOU: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusScore {
    pub detection: DetectionScore,
    /// Matched coughs whose wet/dry label agrees with the truth.
    pub wet_dry_correct: usize,
    /// Matched coughs; a cough that cannot be labelled counts as wrong.
    pub wet_dry_total: usize,
}

impl CorpusScore {
    pub fn wet_dry_accuracy(&self) -> f64 {
        if self.wet_dry_total == 0 {
            return 0.0;
        }
        self.wet_dry_correct as f64 / self.wet_dry_total as f64
    }
}

fn score_clip(clip: &SynthClip, detector: &DetectorConfig, min_iou: f64) -> Result<CorpusScore> {
    let detected = detect_coughs(&clip.clip, detector)?;
    let d: Vec<Interval> = detected
        .iter()
        .map(|s| Interval::new(s.start_ms(), s.end_ms()))
        .collect();
    let t: Vec<Interval> = clip
        .coughs
        .iter()
        .map(|c| Interval::new(c.segment.start_ms(), c.segment.end_ms()))
        .collect();
    let detection = score_detections(&d, &t, min_iou);
    let mut correct = 0;
    for &(i, j) in &detection.matches {
        if let Ok(w) = classify_wet_dry(&clip.clip, &detected[i], detector.wet_dry_threshold) {
            if (w.label == WetDryLabel::Wet) == clip.coughs[j].wet {
                correct += 1;
            }
        }
    }
    Ok(CorpusScore {
        wet_dry_total: detection.matches.len(),
        wet_dry_correct: correct,
        detection,
    })
}

/// Runs the detector and wet/dry classifier over `clips` in parallel and
/// pools the per-clip scores.
pub fn score_clips(clips: &[SynthClip], detector: &DetectorConfig, min_iou: f64) -> Result<CorpusScore> {
    let per_clip = clips
        .par_iter()
        .map(|c| score_clip(c, detector, min_iou))
        .collect::<Result<Vec<_>>>()?;
    let mut total = CorpusScore::default();
    for s in per_clip {
        total.detection.merge(s.detection);
        total.wet_dry_correct += s.wet_dry_correct;
        total.wet_dry_total += s.wet_dry_total;
    }
    Ok(total)
}
