//! Matching detected segments against ground truth.

use serde::{Deserialize, Serialize};

/// Interval in milliseconds, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl Interval {
    pub fn new(start_ms: f64, end_ms: f64) -> Self {
        Self { start_ms, end_ms }
    }

    pub fn iou(&self, other: &Interval) -> f64 {
        let inter = (self.end_ms.min(other.end_ms) - self.start_ms.max(other.start_ms)).max(0.0);
        let union = (self.end_ms - self.start_ms) + (other.end_ms - other.start_ms) - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Absolute start and end errors of every matched pair, in ms.
    pub boundary_errors_ms: Vec<f64>,
    /// Index pairs `(detected, truth)` of the matches.
    pub matches: Vec<(usize, usize)>,
}

impl DetectionScore {
    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    pub fn median_boundary_error_ms(&self) -> f64 {
        if self.boundary_errors_ms.is_empty() {
            return 0.0;
        }
        let mut v = self.boundary_errors_ms.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    pub fn merge(&mut self, other: DetectionScore) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
        self.boundary_errors_ms.extend(other.boundary_errors_ms);
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// One-to-one greedy matching by descending IoU; pairs below `min_iou` are
/// not matches.
pub fn score_detections(detected: &[Interval], truth: &[Interval], min_iou: f64) -> DetectionScore {
    let mut candidates: Vec<(f64, usize, usize)> = detected
        .iter()
        .enumerate()
        .flat_map(|(i, d)| truth.iter().enumerate().map(move |(j, t)| (d.iou(t), i, j)))
        .filter(|(iou, _, _)| *iou >= min_iou)
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_d = vec![false; detected.len()];
    let mut used_t = vec![false; truth.len()];
    let mut score = DetectionScore::default();
    for (_, i, j) in candidates {
        if used_d[i] || used_t[j] {
            continue;
        }
        used_d[i] = true;
        used_t[j] = true;
        score.matches.push((i, j));
        score
            .boundary_errors_ms
            .push((detected[i].start_ms - truth[j].start_ms).abs());
        score
            .boundary_errors_ms
            .push((detected[i].end_ms - truth[j].end_ms).abs());
    }
    score.matches.sort_unstable();
    score.true_positives = score.matches.len();
    score.false_positives = detected.len() - score.true_positives;
    score.false_negatives = truth.len() - score.true_positives;
    score
}
