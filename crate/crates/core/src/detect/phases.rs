//! Splitting a cough segment into explosive, intermediate and voiced phases.

use super::detector::energy_track;
use super::segment::{CoughPattern, CoughSegment, Phase, PhaseBoundary};
use crate::dsp::{ms_to_samples, zcr, AudioClip};
use crate::error::{Error, Result};

const ENVELOPE_FRAME_MS: f64 = 10.0;
const ENVELOPE_HOP_MS: f64 = 5.0;
/// Phase 1 ends once the envelope falls below this fraction of the segment peak.
const EXPLOSIVE_DROP: f64 = 0.5;
/// Minimum envelope rise, as a fraction of the peak, that marks a voiced tail.
const VOICED_REBOUND: f64 = 0.2;
const VOICED_MAX_ZCR: f64 = 0.1;
const VOICED_MIN_MS: f64 = 40.0;

fn smooth3(values: &[f64]) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 2).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Recomputes the phases of `segment` from the clip's energy envelope.
///
/// Phase 1 runs from onset to the first envelope frame below half the segment
/// peak. A trailing region of at least 40 ms whose envelope rebounds by 20 % of
/// the peak above the preceding valley, with a zero-crossing rate under 0.1, is
/// taken as the voiced phase 3. Phase 2 fills the gap between them.
pub fn segment_phases(clip: &AudioClip, segment: &CoughSegment) -> Result<CoughSegment> {
    let (start, end) = (segment.start_sample, segment.end_sample);
    if start >= end || end > clip.len() {
        return Err(Error::invalid(format!(
            "segment [{start}, {end}) outside clip of {} samples",
            clip.len()
        )));
    }
    let fs = clip.sample_rate_hz();
    let samples = &clip.samples()[start..end];
    let frame = ms_to_samples(ENVELOPE_FRAME_MS, fs).max(1);
    let hop = ms_to_samples(ENVELOPE_HOP_MS, fs).max(1);
    let envelope = smooth3(&energy_track(samples, frame, hop));
    // envelope frame j is attributed to the sample at its center
    let at = |j: usize| (start + j * hop + frame / 2).min(end);

    let mut out = segment.clone();
    out.phases = vec![PhaseBoundary {
        phase: Phase::Explosive,
        start,
        end,
    }];
    out.pattern = if segment.split {
        CoughPattern::Peal
    } else {
        CoughPattern::TwoPhase
    };

    let Some((peak_idx, &peak)) = envelope.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return Ok(out);
    };
    if peak <= 0.0 {
        return Ok(out);
    }
    let Some(drop_idx) = (peak_idx + 1..envelope.len()).find(|&j| envelope[j] < EXPLOSIVE_DROP * peak) else {
        return Ok(out);
    };
    let phase2_start = at(drop_idx);
    if phase2_start <= start || phase2_start >= end {
        return Ok(out);
    }

    let voiced_start = find_voiced_tail(&envelope, drop_idx, peak, at, clip, end, fs);

    out.phases[0].end = phase2_start;
    let phase2_end = voiced_start.unwrap_or(end);
    out.phases.push(PhaseBoundary {
        phase: Phase::Intermediate,
        start: phase2_start,
        end: phase2_end,
    });
    if let Some(v) = voiced_start {
        out.phases.push(PhaseBoundary {
            phase: Phase::Voiced,
            start: v,
            end,
        });
        out.pattern = CoughPattern::ThreePhase;
    }
    Ok(out)
}

fn find_voiced_tail(
    envelope: &[f64],
    from: usize,
    peak: f64,
    at: impl Fn(usize) -> usize,
    clip: &AudioClip,
    end: usize,
    fs: u32,
) -> Option<usize> {
    let min_len = ms_to_samples(VOICED_MIN_MS, fs);
    let phase2_start = at(from);
    let mut valley = from;
    for j in from..envelope.len() {
        if envelope[j] < envelope[valley] {
            valley = j;
        }
        if envelope[j] - envelope[valley] < VOICED_REBOUND * peak {
            continue;
        }
        // the tail starts at the local minimum right before the rise
        let mut onset = j;
        while onset > from && envelope[onset - 1] < envelope[onset] {
            onset -= 1;
        }
        let candidate = at(onset);
        if candidate > phase2_start && end > candidate && end - candidate >= min_len {
            let tail = &clip.samples()[candidate..end];
            if zcr(tail).map(|r| r < VOICED_MAX_ZCR).unwrap_or(false) {
                return Some(candidate);
            }
        }
        // not voiced; look for a later rebound
        valley = j;
    }
    None
}
