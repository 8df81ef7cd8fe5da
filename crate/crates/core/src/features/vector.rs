use serde::{Deserialize, Serialize};

use crate::detect::{phase2_band_energies, CoughPattern, CoughSegment, Phase};
use crate::dsp::{frame_samples, shannon_entropy, zcr, AudioClip, MfccConfig, MfccExtractor, Periodogram, Window};
use crate::error::{Error, Result};

pub const N_MFCC: usize = 12;

/// Length of [`FeatureVector::to_vec`].
pub const FEATURE_LEN: usize = 2 * N_MFCC + 12;

/// Column names in [`FeatureVector::to_vec`] order.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_LEN);
    names.extend((0..N_MFCC).map(|i| format!("mfcc_mean_{}", i + 2)));
    names.extend((0..N_MFCC).map(|i| format!("mfcc_std_{}", i + 2)));
    names.extend(
        [
            "zcr_mean",
            "zcr_std",
            "entropy_mean",
            "entropy_std",
            "phase2_low_energy",
            "phase2_high_energy",
            "wet_dry_ratio",
            "duration_ms",
            "peak_amplitude",
        ]
        .map(String::from),
    );
    names.extend(CoughPattern::ALL.iter().map(|p| format!("pattern_{}", p.name())));
    names
}

/// Per-cough acoustic summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mfcc_mean: [f64; N_MFCC],
    pub mfcc_std: [f64; N_MFCC],
    pub zcr_mean: f64,
    pub zcr_std: f64,
    /// Spectral entropy in bits, over frames with non-zero energy.
    pub entropy_mean: f64,
    pub entropy_std: f64,
    /// Mean per-frame band energy in 0–750 Hz over phase 2.
    pub phase2_low_energy: f64,
    /// Mean per-frame band energy in 1500–2250 Hz over phase 2.
    pub phase2_high_energy: f64,
    pub wet_dry_ratio: f64,
    pub duration_ms: f64,
    pub peak_amplitude: f64,
    pub pattern_onehot: [f64; 3],
}

impl FeatureVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(FEATURE_LEN);
        v.extend_from_slice(&self.mfcc_mean);
        v.extend_from_slice(&self.mfcc_std);
        v.extend_from_slice(&[
            self.zcr_mean,
            self.zcr_std,
            self.entropy_mean,
            self.entropy_std,
            self.phase2_low_energy,
            self.phase2_high_energy,
            self.wet_dry_ratio,
            self.duration_ms,
            self.peak_amplitude,
        ]);
        v.extend_from_slice(&self.pattern_onehot);
        v
    }
}

fn mean_std(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Reusable extractor; holds the MFCC plan for one sample rate.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    mfcc: MfccExtractor,
    periodogram: Periodogram,
    sample_rate_hz: u32,
}

impl FeatureExtractor {
    pub fn new(sample_rate_hz: u32) -> Result<Self> {
        let config = MfccConfig::default();
        Ok(Self {
            mfcc: MfccExtractor::new(&config, sample_rate_hz)?,
            periodogram: Periodogram::new(config.frame_spec.nfft)?,
            sample_rate_hz,
        })
    }

    /// MFCC, ZCR and entropy statistics over the segment's 25 ms frames, band
    /// energies over phase 2 (the whole segment when phase 2 is absent).
    pub fn extract(&self, clip: &AudioClip, segment: &CoughSegment) -> Result<FeatureVector> {
        if clip.sample_rate_hz() != self.sample_rate_hz {
            return Err(Error::invalid(format!(
                "extractor built for {} Hz, clip is {} Hz",
                self.sample_rate_hz,
                clip.sample_rate_hz()
            )));
        }
        if segment.end_sample > clip.len() || segment.start_sample >= segment.end_sample {
            return Err(Error::invalid("segment outside clip"));
        }
        let region = &clip.samples()[segment.start_sample..segment.end_sample];
        let analyzer = self.mfcc.analyzer();
        let mfcc = self.mfcc.extract(region)?;
        if mfcc.n_frames() == 0 {
            return Err(Error::TooShort(format!(
                "segment of {} samples is shorter than one {}-sample frame",
                region.len(),
                analyzer.frame_len()
            )));
        }

        let mut mfcc_mean = [0.0; N_MFCC];
        let mut mfcc_std = [0.0; N_MFCC];
        for c in 0..N_MFCC {
            let (m, s) = mean_std(mfcc.rows.iter().map(|r| r[c]));
            mfcc_mean[c] = m;
            mfcc_std[c] = s;
        }

        let raw = frame_samples(region, analyzer.frame_len(), analyzer.hop(), Window::Rectangular)?;
        let (zcr_mean, zcr_std) = mean_std(raw.iter().map(|f| zcr(f)).collect::<Result<Vec<_>>>()?);
        let windowed = frame_samples(region, analyzer.frame_len(), analyzer.hop(), Window::Hann)?;
        let mut entropies = Vec::with_capacity(windowed.len());
        for frame in &windowed {
            match shannon_entropy(&self.periodogram.compute(frame, self.sample_rate_hz)?) {
                Ok(h) => entropies.push(h),
                Err(Error::UndefinedEntropy) => {}
                Err(e) => return Err(e),
            }
        }
        let (entropy_mean, entropy_std) = mean_std(entropies);

        let band_segment;
        let band_source = if segment.phase(Phase::Intermediate).is_some() {
            segment
        } else {
            band_segment = whole_segment_as_phase2(segment);
            &band_segment
        };
        let (low, high) = phase2_band_energies(clip, band_source)?;
        let phase2 = band_source.phase(Phase::Intermediate).expect("phase 2 present");
        let n_frames = band_frame_count(phase2.end - phase2.start, analyzer.frame_len(), analyzer.hop());
        let wet_dry_ratio = low / (high + 1e-12);

        let mut pattern_onehot = [0.0; 3];
        pattern_onehot[segment.pattern.index()] = 1.0;

        Ok(FeatureVector {
            mfcc_mean,
            mfcc_std,
            zcr_mean,
            zcr_std,
            entropy_mean,
            entropy_std,
            phase2_low_energy: low / n_frames as f64,
            phase2_high_energy: high / n_frames as f64,
            wet_dry_ratio,
            duration_ms: segment.duration_ms,
            peak_amplitude: region.iter().fold(0.0, |m: f64, s| m.max(s.abs())),
            pattern_onehot,
        })
    }
}

fn band_frame_count(len: usize, frame: usize, hop: usize) -> usize {
    if len < frame {
        1
    } else {
        (len - frame) / hop + 1
    }
}

fn whole_segment_as_phase2(segment: &CoughSegment) -> CoughSegment {
    let mut s = segment.clone();
    s.phases = vec![
        crate::detect::PhaseBoundary {
            phase: Phase::Explosive,
            start: segment.start_sample,
            end: segment.start_sample,
        },
        crate::detect::PhaseBoundary {
            phase: Phase::Intermediate,
            start: segment.start_sample,
            end: segment.end_sample,
        },
    ];
    s
}

pub fn extract_features(clip: &AudioClip, segment: &CoughSegment) -> Result<FeatureVector> {
    FeatureExtractor::new(clip.sample_rate_hz())?.extract(clip, segment)
}
