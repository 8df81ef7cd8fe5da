//! MFCC and log-mel spectrogram extraction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::audio::AudioClip;
use super::frame::{frame_samples, FrameSpec};
use super::mel::{build_mel_filterbank, MelFilterBank};
use super::spectrum::Periodogram;
use crate::error::{Error, Result};

/// Filterbank energies are floored here before taking the natural log.
pub const LOG_ENERGY_FLOOR: f64 = 1e-10;

pub const DEFAULT_MEL_FILTERS: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub frame_spec: FrameSpec,
    pub n_filters: usize,
    /// First retained coefficient, 1-based.
    pub keep_lo: usize,
    /// Last retained coefficient, 1-based and inclusive.
    pub keep_hi: usize,
    pub f_min_hz: f64,
    /// Upper filterbank edge; `None` means the Nyquist frequency.
    pub f_max_hz: Option<f64>,
}

impl Default for MfccConfig {
    /// 26 filters, coefficients 2 through 13.
    fn default() -> Self {
        Self {
            frame_spec: FrameSpec::default(),
            n_filters: DEFAULT_MEL_FILTERS,
            keep_lo: 2,
            keep_hi: 13,
            f_min_hz: 0.0,
            f_max_hz: None,
        }
    }
}

impl MfccConfig {
    pub fn n_coefficients(&self) -> usize {
        self.keep_hi + 1 - self.keep_lo
    }

    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.keep_lo && self.keep_lo <= self.keep_hi && self.keep_hi <= self.n_filters) {
            return Err(Error::invalid(format!(
                "coefficient range {}..={} must lie within 1..={}",
                self.keep_lo, self.keep_hi, self.n_filters
            )));
        }
        Ok(())
    }
}

/// Frames × retained cepstral coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccMatrix {
    pub rows: Vec<Vec<f64>>,
    pub n_cols: usize,
}

impl MfccMatrix {
    pub fn n_frames(&self) -> usize {
        self.rows.len()
    }
}

/// Precomputed framing, FFT plan and filterbank for one sample rate.
///
/// Building this once and reusing it across clips avoids re-planning the FFT.
#[derive(Debug, Clone)]
pub struct MelAnalyzer {
    spec: FrameSpec,
    sample_rate_hz: u32,
    frame_len: usize,
    hop: usize,
    periodogram: Periodogram,
    bank: MelFilterBank,
}

impl MelAnalyzer {
    pub fn new(
        spec: FrameSpec,
        sample_rate_hz: u32,
        n_filters: usize,
        f_min_hz: f64,
        f_max_hz: Option<f64>,
    ) -> Result<Self> {
        spec.validate(sample_rate_hz)?;
        let f_max = f_max_hz.unwrap_or(sample_rate_hz as f64 / 2.0);
        Ok(Self {
            spec,
            sample_rate_hz,
            frame_len: spec.frame_len_samples(sample_rate_hz),
            hop: spec.hop_samples(sample_rate_hz),
            periodogram: Periodogram::new(spec.nfft)?,
            bank: build_mel_filterbank(n_filters, spec.nfft, sample_rate_hz, f_min_hz, f_max)?,
        })
    }

    pub fn filterbank(&self) -> &MelFilterBank {
        &self.bank
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Natural-log filterbank energies per frame, energies floored at
    /// [`LOG_ENERGY_FLOOR`].
    pub fn log_mel(&self, samples: &[f64]) -> Result<Vec<Vec<f64>>> {
        frame_samples(samples, self.frame_len, self.hop, self.spec.window)?
            .iter()
            .map(|frame| {
                let spectrum = self.periodogram.compute(frame, self.sample_rate_hz)?;
                Ok(self
                    .bank
                    .apply(&spectrum)?
                    .into_iter()
                    .map(|e| e.max(LOG_ENERGY_FLOOR).ln())
                    .collect())
            })
            .collect()
    }
}

/// Rows of the orthonormal DCT-II basis for coefficients `first..first+count`
/// (0-based) over inputs of length `n`.
fn dct2_rows(n: usize, first: usize, count: usize) -> Vec<Vec<f64>> {
    (first..first + count)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            (0..n)
                .map(|i| scale * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// Full orthonormal DCT-II.
pub fn dct2_orthonormal(input: &[f64]) -> Vec<f64> {
    dct2_rows(input.len(), 0, input.len())
        .iter()
        .map(|row| row.iter().zip(input).map(|(a, b)| a * b).sum())
        .collect()
}

/// Reusable MFCC extractor.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    analyzer: MelAnalyzer,
    basis: Vec<Vec<f64>>,
    n_cols: usize,
}

impl MfccExtractor {
    pub fn new(config: &MfccConfig, sample_rate_hz: u32) -> Result<Self> {
        config.validate()?;
        let analyzer = MelAnalyzer::new(
            config.frame_spec,
            sample_rate_hz,
            config.n_filters,
            config.f_min_hz,
            config.f_max_hz,
        )?;
        Ok(Self {
            analyzer,
            basis: dct2_rows(config.n_filters, config.keep_lo - 1, config.n_coefficients()),
            n_cols: config.n_coefficients(),
        })
    }

    pub fn analyzer(&self) -> &MelAnalyzer {
        &self.analyzer
    }

    pub fn extract(&self, samples: &[f64]) -> Result<MfccMatrix> {
        let rows = self
            .analyzer
            .log_mel(samples)?
            .iter()
            .map(|log_energies| self.cepstrum(log_energies))
            .collect();
        Ok(MfccMatrix {
            rows,
            n_cols: self.n_cols,
        })
    }

    fn cepstrum(&self, log_energies: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|row| row.iter().zip(log_energies).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Per frame: periodogram, mel filterbank, log, orthonormal DCT-II, then the
/// retained coefficient range.
pub fn mfcc(clip: &AudioClip, config: &MfccConfig) -> Result<MfccMatrix> {
    MfccExtractor::new(config, clip.sample_rate_hz())?.extract(clip.samples())
}

/// Log filterbank energies, frames × filters, without the DCT step.
pub fn log_mel_spectrogram(clip: &AudioClip, spec: &FrameSpec, n_filters: usize) -> Result<Vec<Vec<f64>>> {
    MelAnalyzer::new(*spec, clip.sample_rate_hz(), n_filters, 0.0, None)?.log_mel(clip.samples())
}
