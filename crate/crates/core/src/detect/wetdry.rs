use serde::{Deserialize, Serialize};

use super::segment::{CoughSegment, Phase};
use crate::dsp::{band_energy, frame_samples, AudioClip, FrameSpec, Periodogram, Window};
use crate::error::{Error, Result};

pub const WET_BAND_HZ: (f64, f64) = (0.0, 750.0);
pub const DRY_BAND_HZ: (f64, f64) = (1500.0, 2250.0);
const RATIO_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WetDryLabel {
    Wet,
    Dry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WetDryResult {
    pub label: WetDryLabel,
    /// Phase-2 energy in 0–750 Hz over energy in 1500–2250 Hz.
    pub ratio: f64,
    pub confidence: f64,
    pub low_energy: f64,
    pub high_energy: f64,
}

/// Phase-2 band energies `(0–750 Hz, 1500–2250 Hz)`, summed over Hann frames
/// of 25 ms every 10 ms. A phase shorter than one frame is analysed as a single
/// zero-padded frame.
pub fn phase2_band_energies(clip: &AudioClip, segment: &CoughSegment) -> Result<(f64, f64)> {
    let phase = segment
        .phase(Phase::Intermediate)
        .ok_or_else(|| Error::NotApplicable("segment has no intermediate (phase 2) region".into()))?;
    if phase.end > clip.len() || phase.start >= phase.end {
        return Err(Error::invalid("phase 2 lies outside the clip"));
    }
    let fs = clip.sample_rate_hz();
    let spec = FrameSpec::default();
    let frame_len = spec.frame_len_samples(fs);
    let nfft = frame_len.next_power_of_two();
    let region = &clip.samples()[phase.start..phase.end];
    let mut frames = frame_samples(region, frame_len, spec.hop_samples(fs).max(1), Window::Hann)?;
    if frames.is_empty() {
        let w = Window::Hann.coefficients(region.len());
        frames.push(region.iter().zip(w).map(|(s, w)| s * w).collect());
    }
    let periodogram = Periodogram::new(nfft)?;
    let nyquist = fs as f64 / 2.0;
    let mut low = 0.0;
    let mut high = 0.0;
    for frame in &frames {
        let spectrum = periodogram.compute(frame, fs)?;
        low += band_energy(&spectrum, WET_BAND_HZ.0, WET_BAND_HZ.1.min(nyquist))?;
        if DRY_BAND_HZ.0 < nyquist {
            high += band_energy(&spectrum, DRY_BAND_HZ.0, DRY_BAND_HZ.1.min(nyquist))?;
        }
    }
    Ok((low, high))
}

/// Labels a cough wet when its phase-2 low/high band energy ratio exceeds
/// `threshold`. Confidence is `r / (1 + r)` with `r = |ln(ratio / threshold)|`.
pub fn classify_wet_dry(clip: &AudioClip, segment: &CoughSegment, threshold: f64) -> Result<WetDryResult> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("wet/dry threshold must be positive"));
    }
    let (low, high) = phase2_band_energies(clip, segment)?;
    let ratio = low / (high + RATIO_EPSILON);
    let r = (ratio / threshold).ln().abs();
    let confidence = if r.is_finite() { r / (1.0 + r) } else { 1.0 };
    Ok(WetDryResult {
        label: if ratio > threshold {
            WetDryLabel::Wet
        } else {
            WetDryLabel::Dry
        },
        ratio,
        confidence,
        low_energy: low,
        high_energy: high,
    })
}
