//! Reference implementations and reporting used by the acceptance run.
//!
//! The oracle recomputes MFCCs with a direct O(N²) DFT, a filterbank built
//! from scratch and an explicit DCT sum. It shares no code with the library
//! beyond the conventions it must agree on.

use std::f64::consts::PI;
use std::fmt;
use std::time::Duration;

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }

    pub fn failed(name: &'static str, err: impl fmt::Display) -> Self {
        Self::new(name, false, format!("error: {err}"))
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag}  {:<24} {}", self.name, self.detail)
    }
}

pub fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

/// Settings the oracle mirrors.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub sample_rate_hz: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub nfft: usize,
    pub n_filters: usize,
    /// 1-based inclusive range of kept cepstral coefficients.
    pub keep: (usize, usize),
    pub energy_floor: f64,
}

impl OracleConfig {
    /// 25 ms Hann frames every 10 ms at 22,050 Hz, 1024-point DFT, 26 filters,
    /// coefficients 2 to 13.
    pub fn standard() -> Self {
        Self {
            sample_rate_hz: 22_050,
            frame_len: 551,
            hop: 220,
            nfft: 1024,
            n_filters: 26,
            keep: (2, 13),
            energy_floor: 1e-10,
        }
    }
}

fn mel(f: f64) -> f64 {
    1125.0 * (1.0 + f / 700.0).ln()
}

fn inv_mel(m: f64) -> f64 {
    700.0 * ((m / 1125.0).exp() - 1.0)
}

/// Triangular filter weights, `n_filters` rows of `nfft / 2 + 1`.
pub fn oracle_filterbank(cfg: &OracleConfig) -> Vec<Vec<f64>> {
    let fs = cfg.sample_rate_hz as f64;
    let top = mel(fs / 2.0);
    let half = cfg.nfft / 2;
    let points: Vec<usize> = (0..cfg.n_filters + 2)
        .map(|i| {
            let hz = inv_mel(top * i as f64 / (cfg.n_filters + 1) as f64);
            (((cfg.nfft + 1) as f64 * hz / fs).floor() as usize).min(half)
        })
        .collect();
    let mut bank = vec![vec![0.0; half + 1]; cfg.n_filters];
    for (m, row) in bank.iter_mut().enumerate() {
        let (a, b, c) = (points[m], points[m + 1], points[m + 2]);
        for (k, w) in row.iter_mut().enumerate() {
            if k >= a && k < b {
                *w = (k - a) as f64 / (b - a) as f64;
            } else if k == b {
                *w = 1.0;
            } else if k > b && k <= c {
                *w = (c - k) as f64 / (c - b) as f64;
            }
        }
    }
    bank
}

/// `|X_k|² / nfft` for `k = 0..=nfft/2` by direct summation.
pub fn oracle_periodogram(frame: &[f64], nfft: usize, cos: &[f64], sin: &[f64]) -> Vec<f64> {
    (0..=nfft / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &x) in frame.iter().enumerate() {
                let idx = (k * n) % nfft;
                re += x * cos[idx];
                im -= x * sin[idx];
            }
            (re * re + im * im) / nfft as f64
        })
        .collect()
}

/// Frames × kept coefficients.
pub fn oracle_mfcc(samples: &[f64], cfg: &OracleConfig) -> Vec<Vec<f64>> {
    let n = cfg.nfft;
    let cos: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).cos()).collect();
    let sin: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
    let hann: Vec<f64> = (0..cfg.frame_len)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / cfg.frame_len as f64).cos()))
        .collect();
    let bank = oracle_filterbank(cfg);
    let j = cfg.n_filters as f64;
    let mut out = Vec::new();
    let mut start = 0;
    while start + cfg.frame_len <= samples.len() {
        let frame: Vec<f64> = samples[start..start + cfg.frame_len]
            .iter()
            .zip(&hann)
            .map(|(x, w)| x * w)
            .collect();
        let power = oracle_periodogram(&frame, n, &cos, &sin);
        let log_e: Vec<f64> = bank
            .iter()
            .map(|w| {
                w.iter()
                    .zip(&power)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .max(cfg.energy_floor)
                    .ln()
            })
            .collect();
        let coeffs = (cfg.keep.0..=cfg.keep.1)
            .map(|c| {
                let k = (c - 1) as f64;
                let norm = if c == 1 { (1.0 / j).sqrt() } else { (2.0 / j).sqrt() };
                norm * log_e
                    .iter()
                    .enumerate()
                    .map(|(m, e)| e * (PI * k * (m as f64 + 0.5) / j).cos())
                    .sum::<f64>()
            })
            .collect();
        out.push(coeffs);
        start += cfg.hop;
    }
    out
}

/// Largest element-wise difference divided by the largest reference magnitude.
pub fn normwise_relative_error(got: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    if got.len() != reference.len() || got.iter().zip(reference).any(|(a, b)| a.len() != b.len()) {
        return f64::INFINITY;
    }
    let scale = reference
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let diff = got
        .iter()
        .flatten()
        .zip(reference.iter().flatten())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    diff / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filterbank_rows_peak_at_one() {
        let bank = oracle_filterbank(&OracleConfig::standard());
        assert_eq!(bank.len(), 26);
        for row in &bank {
            let peak = row.iter().cloned().fold(0.0, f64::max);
            assert_eq!(peak, 1.0);
        }
    }

    #[test]
    fn periodogram_of_impulse_is_flat() {
        let n = 16;
        let cos: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).cos()).collect();
        let sin: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
        let p = oracle_periodogram(&[1.0], n, &cos, &sin);
        assert!(p.iter().all(|&v| (v - 1.0 / n as f64).abs() < 1e-15));
    }

    #[test]
    fn relative_error_shape_mismatch_is_infinite() {
        assert!(normwise_relative_error(&[vec![1.0]], &[]).is_infinite());
        assert_eq!(normwise_relative_error(&[vec![1.0, 2.0]], &[vec![1.0, 2.0]]), 0.0);
    }
}
