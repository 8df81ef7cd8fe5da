//! Periodogram power spectra and the measures taken on them.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-sided power spectrum with `nfft / 2 + 1` non-negative bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub bins: Vec<f64>,
    pub bin_width_hz: f64,
}

impl PowerSpectrum {
    pub fn nfft(&self) -> usize {
        (self.bins.len() - 1) * 2
    }

    pub fn nyquist_hz(&self) -> f64 {
        (self.bins.len() - 1) as f64 * self.bin_width_hz
    }

    pub fn total_energy(&self) -> f64 {
        self.bins.iter().sum()
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.bin_width_hz
    }
}

/// Reusable FFT plan for repeated periodograms of one size.
#[derive(Clone)]
pub struct Periodogram {
    nfft: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Periodogram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Periodogram").field("nfft", &self.nfft).finish()
    }
}

impl Periodogram {
    pub fn new(nfft: usize) -> Result<Self> {
        if nfft < 2 || !nfft.is_power_of_two() {
            return Err(Error::invalid(format!("nfft {nfft} is not a power of two >= 2")));
        }
        let fft = FftPlanner::new().plan_fft_forward(nfft);
        Ok(Self { nfft, fft })
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    /// `bins[k] = |X_k|^2 / nfft` for `k = 0..=nfft/2`, with the frame
    /// zero-padded to `nfft`.
    pub fn compute(&self, frame: &[f64], sample_rate_hz: u32) -> Result<PowerSpectrum> {
        if frame.len() > self.nfft {
            return Err(Error::invalid(format!(
                "frame of {} samples exceeds nfft {}",
                frame.len(),
                self.nfft
            )));
        }
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .map(|&x| Complex::new(x, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.nfft)
            .collect();
        self.fft.process(&mut buf);
        let scale = 1.0 / self.nfft as f64;
        Ok(PowerSpectrum {
            bins: buf[..=self.nfft / 2].iter().map(|c| c.norm_sqr() * scale).collect(),
            bin_width_hz: sample_rate_hz as f64 / self.nfft as f64,
        })
    }
}

/// Periodogram estimate of a single (already windowed) frame.
pub fn periodogram(frame: &[f64], nfft: usize, sample_rate_hz: u32) -> Result<PowerSpectrum> {
    Periodogram::new(nfft)?.compute(frame, sample_rate_hz)
}

/// Sum of bins whose center frequency lies in `[f_lo, f_hi)`. A band reaching
/// the Nyquist frequency also includes the Nyquist bin, so adjacent bands
/// partition the spectrum.
pub fn band_energy(spectrum: &PowerSpectrum, f_lo: f64, f_hi: f64) -> Result<f64> {
    let nyquist = spectrum.nyquist_hz();
    if !(f_lo >= 0.0 && f_lo < f_hi && f_hi <= nyquist + 1e-9) {
        return Err(Error::invalid(format!(
            "band [{f_lo}, {f_hi}) must satisfy 0 <= lo < hi <= {nyquist}"
        )));
    }
    let closed_top = f_hi >= nyquist;
    Ok(spectrum
        .bins
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = spectrum.bin_frequency(*k);
            f >= f_lo && (f < f_hi || (closed_top && f <= nyquist))
        })
        .map(|(_, &e)| e)
        .sum())
}

/// Shannon entropy (bits) of the spectrum normalized to a distribution.
pub fn shannon_entropy(spectrum: &PowerSpectrum) -> Result<f64> {
    let total = spectrum.total_energy();
    if !(total > 0.0) {
        return Err(Error::UndefinedEntropy);
    }
    Ok(spectrum
        .bins
        .iter()
        .filter(|&&e| e > 0.0)
        .map(|&e| {
            let p = e / total;
            -p * p.log2()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn brute_force_periodogram(frame: &[f64], nfft: usize) -> Vec<f64> {
        (0..=nfft / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &x) in frame.iter().enumerate() {
                    let angle = -2.0 * PI * (k * n) as f64 / nfft as f64;
                    re += x * angle.cos();
                    im += x * angle.sin();
                }
                (re * re + im * im) / nfft as f64
            })
            .collect()
    }

    #[test]
    fn zero_frame_gives_zero_spectrum() {
        let s = periodogram(&[0.0; 551], 1024, 22_050).unwrap();
        assert_eq!(s.bins.len(), 513);
        assert!(s.bins.iter().all(|&b| b == 0.0));
        assert!((s.bin_width_hz - 22_050.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_nfft_and_long_frames() {
        assert!(periodogram(&[0.0; 10], 1000, 22_050).is_err());
        assert!(periodogram(&[0.0; 2048], 1024, 22_050).is_err());
    }

    #[test]
    fn on_bin_sine_concentrates_energy() {
        let nfft = 1024;
        let k = 37;
        let frame: Vec<f64> = (0..nfft)
            .map(|n| (2.0 * PI * (k * n) as f64 / nfft as f64).sin())
            .collect();
        let s = periodogram(&frame, nfft, 22_050).unwrap();
        assert!(s.bins[k] / s.total_energy() > 0.99);
    }

    #[test]
    fn matches_direct_dft() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let len = rng.random_range(50..256);
            let frame: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = periodogram(&frame, 256, 8_000).unwrap();
            let slow = brute_force_periodogram(&frame, 256);
            let scale = slow.iter().cloned().fold(0.0, f64::max);
            for (a, b) in fast.bins.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-9 * scale.max(1e-300));
            }
        }
    }

    #[test]
    fn entropy_cases() {
        let single = PowerSpectrum {
            bins: vec![0.0, 0.0, 3.0, 0.0, 0.0],
            bin_width_hz: 1.0,
        };
        assert_eq!(shannon_entropy(&single).unwrap(), 0.0);
        let flat = PowerSpectrum {
            bins: vec![2.0; 8],
            bin_width_hz: 1.0,
        };
        assert!((shannon_entropy(&flat).unwrap() - 3.0).abs() < 1e-12);
        let zero = PowerSpectrum {
            bins: vec![0.0; 8],
            bin_width_hz: 1.0,
        };
        assert!(matches!(shannon_entropy(&zero), Err(Error::UndefinedEntropy)));
    }

    #[test]
    fn band_energy_full_band_and_errors() {
        let s = periodogram(&[0.3, -0.2, 0.9, 0.1], 8, 8_000).unwrap();
        let total = s.total_energy();
        assert!((band_energy(&s, 0.0, 4_000.0).unwrap() - total).abs() < 1e-15);
        assert!(band_energy(&s, 500.0, 100.0).is_err());
        assert!(band_energy(&s, 0.0, 5_000.0).is_err());
        assert!(band_energy(&s, -1.0, 100.0).is_err());
    }

    #[test]
    fn tone_500hz_mostly_in_low_band() {
        let fs = 22_050;
        let frame: Vec<f64> = crate::dsp::Window::Hann
            .coefficients(1024)
            .iter()
            .enumerate()
            .map(|(n, w)| w * (2.0 * PI * 500.0 * n as f64 / fs as f64).sin())
            .collect();
        let s = periodogram(&frame, 1024, fs).unwrap();
        let low = band_energy(&s, 0.0, 750.0).unwrap();
        assert!(low / s.total_energy() > 0.99);
    }

    proptest! {
        #[test]
        fn entropy_within_bounds(bins in proptest::collection::vec(0.0f64..10.0, 2..64)) {
            prop_assume!(bins.iter().sum::<f64>() > 0.0);
            let n = bins.len() as f64;
            let h = shannon_entropy(&PowerSpectrum { bins, bin_width_hz: 1.0 }).unwrap();
            prop_assert!(h >= 0.0 && h <= n.log2() + 1e-12);
        }

        #[test]
        fn band_energy_additive_and_monotone(
            frame in proptest::collection::vec(-1.0f64..1.0, 16..128),
            a in 0.0f64..4_000.0,
            b in 0.0f64..4_000.0,
        ) {
            let s = periodogram(&frame, 128, 8_000).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(lo > 0.0 && hi > lo);
            let total = s.total_energy();
            let left = band_energy(&s, 0.0, lo).unwrap();
            let right = band_energy(&s, lo, 4_000.0).unwrap();
            prop_assert!((left + right - total).abs() <= 1e-12 * total.max(1.0));
            let inner = band_energy(&s, lo, hi).unwrap();
            let outer = band_energy(&s, 0.0, hi).unwrap();
            prop_assert!(inner <= outer + 1e-15);
        }

        #[test]
        fn parseval_with_symmetric_bins_doubled(
            frame in proptest::collection::vec(-1.0f64..1.0, 8..256),
            log_nfft in 8u32..11,
        ) {
            let nfft = 1usize << log_nfft;
            let s = periodogram(&frame, nfft, 22_050).unwrap();
            let half = nfft / 2;
            let folded = s.bins[0] + s.bins[half] + 2.0 * s.bins[1..half].iter().sum::<f64>();
            let energy: f64 = frame.iter().map(|x| x * x).sum();
            prop_assume!(energy > 0.0);
            prop_assert!((folded - energy).abs() / energy < 1e-9);
        }
    }
}
