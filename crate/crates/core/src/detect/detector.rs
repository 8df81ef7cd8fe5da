//! Energy-gated cough event detection.

use serde::{Deserialize, Serialize};

use super::phases::segment_phases;
use super::segment::{samples_to_ms, CoughPattern, CoughSegment, Phase, PhaseBoundary};
use crate::dsp::{ms_to_samples, AudioClip};
use crate::error::{Error, Result};

/// Fine envelope used to sharpen window-level boundaries.
const FINE_FRAME_MS: f64 = 10.0;
const FINE_HOP_MS: f64 = 5.0;

/// Keeps the onset threshold above float dust on noiseless input; relative to
/// the loudest window so the detector stays scale-invariant.
const RELATIVE_ENERGY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub analysis_window_ms: f64,
    /// Onset threshold in median absolute deviations above the median energy.
    pub energy_threshold_k: f64,
    pub min_duration_ms: f64,
    pub max_duration_ms: f64,
    /// Offset threshold as a fraction of the onset threshold's excess over the median.
    pub hysteresis_ratio: f64,
    /// Wet/dry decision threshold on the low/high band energy ratio.
    pub wet_dry_threshold: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            analysis_window_ms: 50.0,
            energy_threshold_k: 4.0,
            min_duration_ms: 120.0,
            max_duration_ms: 1000.0,
            hysteresis_ratio: 0.5,
            wet_dry_threshold: 1.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.analysis_window_ms > 0.0) {
            return Err(Error::invalid("analysis window must be positive"));
        }
        if !(self.energy_threshold_k > 0.0) {
            return Err(Error::invalid("energy threshold k must be positive"));
        }
        if !(self.min_duration_ms >= 0.0 && self.min_duration_ms < self.max_duration_ms) {
            return Err(Error::invalid("min duration must be below max duration"));
        }
        if !(self.hysteresis_ratio > 0.0 && self.hysteresis_ratio <= 1.0) {
            return Err(Error::invalid("hysteresis ratio must lie in (0, 1]"));
        }
        if !(self.wet_dry_threshold > 0.0) {
            return Err(Error::invalid("wet/dry threshold must be positive"));
        }
        Ok(())
    }
}

/// Mean-square energy of `frame`-sample windows every `hop` samples.
pub(crate) fn energy_track(samples: &[f64], frame: usize, hop: usize) -> Vec<f64> {
    if frame == 0 || hop == 0 || samples.len() < frame {
        return Vec::new();
    }
    (0..(samples.len() - frame) / hop + 1)
        .map(|i| {
            let w = &samples[i * hop..i * hop + frame];
            w.iter().map(|s| s * s).sum::<f64>() / frame as f64
        })
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy)]
struct Thresholds {
    onset: f64,
    offset: f64,
}

/// Onset at `median + k * MAD`; offset `hysteresis_ratio` of the way from the
/// median to the onset level.
fn thresholds(track: &[f64], k: f64, ratio: f64) -> Thresholds {
    let med = median(track);
    let deviations: Vec<f64> = track.iter().map(|e| (e - med).abs()).collect();
    let mad = median(&deviations);
    let peak = track.iter().cloned().fold(0.0, f64::max);
    let onset = (med + k * mad).max(peak * RELATIVE_ENERGY_FLOOR);
    Thresholds {
        onset,
        offset: med + ratio * (onset - med),
    }
}

/// Hysteresis gate over a track; returns `[first, last]` index ranges, inclusive.
fn gate(track: &[f64], th: Thresholds) -> Vec<(usize, usize)> {
    let mut regions = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &e) in track.iter().enumerate() {
        match open {
            None if e > th.onset => open = Some(i),
            Some(s) if e < th.offset => {
                regions.push((s, i - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        regions.push((s, track.len() - 1));
    }
    regions
}

struct Tracks {
    window: usize,
    hop: usize,
    coarse: Vec<f64>,
    coarse_th: Thresholds,
    fine_frame: usize,
    fine_hop: usize,
    fine: Vec<f64>,
    fine_th: Thresholds,
}

impl Tracks {
    fn new(samples: &[f64], fs: u32, config: &DetectorConfig) -> Self {
        let window = ms_to_samples(config.analysis_window_ms, fs).max(2);
        let hop = (window / 2).max(1);
        let coarse = energy_track(samples, window, hop);
        let coarse_th = thresholds(&coarse, config.energy_threshold_k, config.hysteresis_ratio);
        let fine_frame = ms_to_samples(FINE_FRAME_MS, fs).max(1);
        let fine_hop = ms_to_samples(FINE_HOP_MS, fs).max(1);
        let fine = energy_track(samples, fine_frame, fine_hop);
        let fine_th = thresholds(&fine, config.energy_threshold_k, config.hysteresis_ratio);
        Self {
            window,
            hop,
            coarse,
            coarse_th,
            fine_frame,
            fine_hop,
            fine,
            fine_th,
        }
    }

    /// First fine frame above the fine onset level near the coarse onset.
    fn refine_start(&self, coarse_start: usize) -> usize {
        let lo = coarse_start.saturating_sub(self.hop);
        let hi = coarse_start + self.window;
        (lo / self.fine_hop..self.fine.len())
            .take_while(|&j| j * self.fine_hop < hi)
            .find(|&j| self.fine[j] > self.fine_th.onset)
            .map(|j| j * self.fine_hop)
            .unwrap_or(coarse_start)
    }

    /// End of the last fine frame above the fine offset level near the coarse end.
    fn refine_end(&self, coarse_end: usize, floor: usize) -> usize {
        let lo = coarse_end.saturating_sub(self.window + self.hop).max(floor);
        (lo / self.fine_hop..self.fine.len())
            .take_while(|&j| j * self.fine_hop + self.fine_frame <= coarse_end + self.hop)
            .filter(|&j| self.fine[j] > self.fine_th.offset)
            .last()
            .map(|j| j * self.fine_hop + self.fine_frame)
            .unwrap_or(coarse_end)
    }

    /// Deepest interior energy valley of coarse windows `[first, last]`.
    fn deepest_valley(&self, first: usize, last: usize) -> Option<usize> {
        if last < first + 2 {
            return None;
        }
        (first + 1..last).min_by(|&a, &b| self.coarse[a].total_cmp(&self.coarse[b]))
    }
}

/// Detects cough events by short-time energy gating.
///
/// Energy is measured over `analysis_window_ms` windows with a half-window hop.
/// A segment opens when energy exceeds `median + k * MAD` of the clip's track and
/// closes when it falls back below the hysteresis level. Boundaries are then
/// sharpened on a 10 ms envelope. Segments below `min_duration_ms` are dropped;
/// segments above `max_duration_ms` are split at their deepest energy valley
/// and tagged as peal coughs unless voiced. Returned segments carry their
/// phases, are sorted and never overlap.
pub fn detect_coughs(clip: &AudioClip, config: &DetectorConfig) -> Result<Vec<CoughSegment>> {
    config.validate()?;
    let fs = clip.sample_rate_hz();
    let samples = clip.samples();
    let tracks = Tracks::new(samples, fs, config);
    if tracks.coarse.is_empty() {
        return Ok(Vec::new());
    }
    let min_len = ms_to_samples(config.min_duration_ms, fs);
    let max_len = ms_to_samples(config.max_duration_ms, fs);

    // (first window, last window, split)
    let mut pending: Vec<(usize, usize, bool)> = gate(&tracks.coarse, tracks.coarse_th)
        .into_iter()
        .map(|(a, b)| (a, b, false))
        .collect();
    let mut bounds: Vec<(usize, usize, bool)> = Vec::new();
    let mut last_end = 0usize;
    while let Some((a, b, split)) = (!pending.is_empty()).then(|| pending.remove(0)) {
        let coarse_start = a * tracks.hop;
        let coarse_end = (b * tracks.hop + tracks.window).min(samples.len());
        let start = tracks.refine_start(coarse_start).max(last_end);
        let end = tracks.refine_end(coarse_end, start).min(samples.len());
        if end <= start {
            continue;
        }
        if end - start > max_len {
            if let Some(v) = tracks.deepest_valley(a, b) {
                pending.insert(0, (v + 1, b, true));
                pending.insert(0, (a, v.saturating_sub(1).max(a), true));
                continue;
            }
        }
        if end - start < min_len {
            continue;
        }
        bounds.push((start, end, split));
        last_end = end;
    }

    bounds
        .into_iter()
        .map(|(start, end, split)| {
            let segment = bare_segment(samples, fs, start, end, split);
            segment_phases(clip, &segment)
        })
        .collect()
}

fn bare_segment(samples: &[f64], fs: u32, start: usize, end: usize, split: bool) -> CoughSegment {
    let peak_amplitude = samples[start..end].iter().fold(0.0f64, |m, s| m.max(s.abs()));
    CoughSegment {
        start_sample: start,
        end_sample: end,
        sample_rate_hz: fs,
        phases: vec![PhaseBoundary {
            phase: Phase::Explosive,
            start,
            end,
        }],
        pattern: if split {
            CoughPattern::Peal
        } else {
            CoughPattern::TwoPhase
        },
        peak_amplitude,
        duration_ms: samples_to_ms(end - start, fs),
        split,
    }
}
