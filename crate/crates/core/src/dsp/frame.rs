//! Framing and per-frame time-domain measures.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::audio::AudioClip;
use crate::error::{Error, Result};

// Absorbs float noise when converting milliseconds to sample counts,
// so e.g. 221 samples expressed in ms maps back to 221.
const MS_TO_SAMPLES_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    /// Periodic window coefficients of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub frame_len_ms: f64,
    pub hop_len_ms: f64,
    pub window: Window,
    pub nfft: usize,
}

impl Default for FrameSpec {
    /// 25 ms Hann frames every 10 ms, 1024-point FFT.
    fn default() -> Self {
        Self {
            frame_len_ms: 25.0,
            hop_len_ms: 10.0,
            window: Window::Hann,
            nfft: 1024,
        }
    }
}

impl FrameSpec {
    /// Non-overlapping frames (hop equal to the frame length), as used for
    /// spectrogram inputs.
    pub fn non_overlapping(frame_len_ms: f64) -> Self {
        Self {
            frame_len_ms,
            hop_len_ms: frame_len_ms,
            ..Self::default()
        }
    }

    pub fn frame_len_samples(&self, sample_rate_hz: u32) -> usize {
        ms_to_samples(self.frame_len_ms, sample_rate_hz)
    }

    pub fn hop_samples(&self, sample_rate_hz: u32) -> usize {
        ms_to_samples(self.hop_len_ms, sample_rate_hz)
    }

    /// Checks the 20–40 ms frame range, a positive hop and an FFT size that is
    /// a power of two covering the frame at `sample_rate_hz`.
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        if !(20.0..=40.0).contains(&self.frame_len_ms) {
            return Err(Error::invalid(format!(
                "frame length {} ms outside 20..=40 ms",
                self.frame_len_ms
            )));
        }
        if !(self.hop_len_ms > 0.0) || self.hop_samples(sample_rate_hz) == 0 {
            return Err(Error::invalid("hop length must be positive"));
        }
        let frame_len = self.frame_len_samples(sample_rate_hz);
        if !self.nfft.is_power_of_two() || self.nfft < frame_len {
            return Err(Error::invalid(format!(
                "nfft {} must be a power of two >= frame length {frame_len}",
                self.nfft
            )));
        }
        Ok(())
    }
}

pub(crate) fn ms_to_samples(ms: f64, sample_rate_hz: u32) -> usize {
    (ms / 1000.0 * sample_rate_hz as f64 + MS_TO_SAMPLES_SLACK).floor() as usize
}

/// Splits a clip into windowed frames according to `spec`.
///
/// The trailing partial frame is dropped; a clip shorter than one frame yields
/// no frames.
pub fn frame_signal(clip: &AudioClip, spec: &FrameSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate(clip.sample_rate_hz())?;
    let fs = clip.sample_rate_hz();
    frame_samples(
        clip.samples(),
        spec.frame_len_samples(fs),
        spec.hop_samples(fs),
        spec.window,
    )
}

/// Sample-count variant of [`frame_signal`].
pub fn frame_samples(samples: &[f64], frame_len: usize, hop: usize, window: Window) -> Result<Vec<Vec<f64>>> {
    if frame_len == 0 || hop == 0 {
        return Err(Error::invalid("frame length and hop must be positive"));
    }
    if samples.len() < frame_len {
        return Ok(Vec::new());
    }
    let coeffs = window.coefficients(frame_len);
    let count = (samples.len() - frame_len) / hop + 1;
    Ok((0..count)
        .map(|i| {
            samples[i * hop..i * hop + frame_len]
                .iter()
                .zip(&coeffs)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect())
}

/// Fraction of consecutive sample pairs whose signs differ. Zero counts as
/// positive.
pub fn zcr(frame: &[f64]) -> Result<f64> {
    if frame.len() < 2 {
        return Err(Error::invalid("zero-crossing rate needs at least 2 samples"));
    }
    let crossings = frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
    Ok(crossings as f64 / (frame.len() - 1) as f64)
}
