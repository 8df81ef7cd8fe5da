//! Mel scale conversions and triangular mel filterbanks.

use serde::{Deserialize, Serialize};

use super::spectrum::PowerSpectrum;
use crate::error::{Error, Result};

const MEL_SCALE: f64 = 1125.0;
const MEL_BREAK_HZ: f64 = 700.0;

/// `M(f) = 1125 ln(1 + f / 700)`.
pub fn hz_to_mel(f: f64) -> Result<f64> {
    if !(f >= 0.0) {
        return Err(Error::invalid(format!("frequency {f} Hz is negative")));
    }
    Ok(MEL_SCALE * (f / MEL_BREAK_HZ).ln_1p())
}

/// Algebraic inverse of [`hz_to_mel`]: `700 (exp(m / 1125) - 1)`.
pub fn mel_to_hz(m: f64) -> Result<f64> {
    if !(m >= 0.0) {
        return Err(Error::invalid(format!("mel value {m} is negative")));
    }
    Ok(MEL_BREAK_HZ * (m / MEL_SCALE).exp_m1())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelFilterBank {
    pub n_filters: usize,
    pub nfft: usize,
    pub sample_rate_hz: u32,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// `n_filters + 2` breakpoints, equally spaced in mel.
    pub breakpoint_mels: Vec<f64>,
    /// Breakpoints snapped to FFT bin indices.
    pub breakpoint_bins: Vec<usize>,
    /// `n_filters` rows of `nfft / 2 + 1` weights.
    pub filters: Vec<Vec<f64>>,
}

impl MelFilterBank {
    /// Frequency of the bin where filter `i` peaks.
    pub fn center_hz(&self, i: usize) -> f64 {
        self.breakpoint_bins[i + 1] as f64 * self.sample_rate_hz as f64 / self.nfft as f64
    }

    pub fn apply(&self, spectrum: &PowerSpectrum) -> Result<Vec<f64>> {
        let n_bins = self.nfft / 2 + 1;
        if spectrum.bins.len() != n_bins {
            return Err(Error::shape(format!("{n_bins} spectrum bins"), spectrum.bins.len()));
        }
        Ok(self
            .filters
            .iter()
            .map(|w| w.iter().zip(&spectrum.bins).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Triangular filters over `n_filters + 2` mel-spaced breakpoints, snapped to
/// bins with `floor((nfft + 1) f / fs)`. Filter `i` rises from breakpoint `i`
/// to a peak of 1 at `i + 1` and falls to zero at `i + 2`.
pub fn build_mel_filterbank(
    n_filters: usize,
    nfft: usize,
    sample_rate_hz: u32,
    f_min_hz: f64,
    f_max_hz: f64,
) -> Result<MelFilterBank> {
    if n_filters < 2 {
        return Err(Error::invalid("need at least 2 mel filters"));
    }
    if nfft < 2 || !nfft.is_power_of_two() {
        return Err(Error::invalid(format!("nfft {nfft} is not a power of two")));
    }
    let nyquist = sample_rate_hz as f64 / 2.0;
    if !(f_min_hz >= 0.0 && f_min_hz < f_max_hz && f_max_hz <= nyquist) {
        return Err(Error::invalid(format!(
            "filterbank range [{f_min_hz}, {f_max_hz}] must satisfy 0 <= min < max <= {nyquist}"
        )));
    }
    let mel_lo = hz_to_mel(f_min_hz)?;
    let mel_hi = hz_to_mel(f_max_hz)?;
    let step = (mel_hi - mel_lo) / (n_filters + 1) as f64;
    let breakpoint_mels: Vec<f64> = (0..n_filters + 2).map(|i| mel_lo + step * i as f64).collect();
    let last_bin = nfft / 2;
    let breakpoint_bins = breakpoint_mels
        .iter()
        .map(|&m| {
            let hz = mel_to_hz(m)?;
            let bin = ((nfft + 1) as f64 * hz / sample_rate_hz as f64).floor() as usize;
            Ok(bin.min(last_bin))
        })
        .collect::<Result<Vec<usize>>>()?;

    let filters = (0..n_filters)
        .map(|i| {
            let (left, center, right) = (breakpoint_bins[i], breakpoint_bins[i + 1], breakpoint_bins[i + 2]);
            let mut weights = vec![0.0; last_bin + 1];
            for (k, w) in weights.iter_mut().enumerate().take(right + 1).skip(left) {
                *w = if k < center {
                    (k - left) as f64 / (center - left) as f64
                } else if k == center {
                    1.0
                } else {
                    (right - k) as f64 / (right - center) as f64
                };
            }
            weights
        })
        .collect();

    Ok(MelFilterBank {
        n_filters,
        nfft,
        sample_rate_hz,
        f_min_hz,
        f_max_hz,
        breakpoint_mels,
        breakpoint_bins,
        filters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_reference_values() {
        assert_eq!(hz_to_mel(0.0).unwrap(), 0.0);
        assert_eq!(mel_to_hz(0.0).unwrap(), 0.0);
        // 1125 ln(1 + 1000/700)
        let m = hz_to_mel(1000.0).unwrap();
        assert!((m - 998.216_094_376).abs() < 1e-6, "{m}");
        assert!((mel_to_hz(998.22).unwrap() - 1_000.005_902).abs() < 1e-5);
        assert!(hz_to_mel(-1.0).is_err());
        assert!(mel_to_hz(-0.5).is_err());
    }

    #[test]
    fn mel_round_trip_and_monotone() {
        let mut prev = -1.0;
        for f in (50..=11_025).step_by(25) {
            let f = f as f64;
            let m = hz_to_mel(f).unwrap();
            assert!(m > prev);
            prev = m;
            let back = mel_to_hz(m).unwrap();
            assert!((back - f).abs() / f < 1e-9);
        }
    }

    #[test]
    fn default_bank_spans_bins_0_to_512() {
        let bank = build_mel_filterbank(26, 1024, 22_050, 0.0, 11_025.0).unwrap();
        assert_eq!(bank.filters.len(), 26);
        assert_eq!(bank.breakpoint_bins.len(), 28);
        assert_eq!(bank.breakpoint_bins[0], 0);
        assert_eq!(*bank.breakpoint_bins.last().unwrap(), 512);
        for f in &bank.filters {
            assert_eq!(f.len(), 513);
            assert!(f.iter().sum::<f64>() > 0.0);
            assert!(f.iter().all(|&w| (0.0..=1.0).contains(&w)));
        }
    }

    #[test]
    fn breakpoints_are_arithmetic_in_mel() {
        let bank = build_mel_filterbank(20, 512, 16_000, 100.0, 7_000.0).unwrap();
        let spacing = (hz_to_mel(7_000.0).unwrap() - hz_to_mel(100.0).unwrap()) / 21.0;
        for pair in bank.breakpoint_mels.windows(2) {
            assert!((pair[1] - pair[0] - spacing).abs() < 1e-9);
        }
    }

    #[test]
    fn filters_are_unimodal_triangles() {
        let bank = build_mel_filterbank(26, 1024, 22_050, 0.0, 11_025.0).unwrap();
        for (i, f) in bank.filters.iter().enumerate() {
            let peak = bank.breakpoint_bins[i + 1];
            assert_eq!(f[peak], 1.0);
            for k in 1..=peak {
                assert!(f[k] >= f[k - 1]);
            }
            for k in peak + 1..f.len() {
                assert!(f[k] <= f[k - 1]);
            }
        }
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(build_mel_filterbank(26, 1024, 22_050, 0.0, 12_000.0).is_err());
        assert!(build_mel_filterbank(26, 1024, 22_050, 500.0, 400.0).is_err());
        assert!(build_mel_filterbank(1, 1024, 22_050, 0.0, 11_025.0).is_err());
        assert!(build_mel_filterbank(26, 1000, 22_050, 0.0, 11_025.0).is_err());
    }
}
