use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::noise::{band_noise, white};
use crate::detect::{CoughPattern, CoughSegment, Phase, PhaseBoundary, DRY_BAND_HZ, WET_BAND_HZ};
use crate::dsp::CANONICAL_RATE_HZ;
use crate::error::{Error, Result};

pub const PHASE1_MS: (f64, f64) = (30.0, 80.0);
pub const PHASE2_MS: (f64, f64) = (100.0, 300.0);
pub const PHASE3_MS: (f64, f64) = (40.0, 120.0);
pub const VOICED_F0_HZ: (f64, f64) = (150.0, 300.0);
pub const MAX_COUGH_MS: f64 = 1000.0;

/// Lowest frequency of the synthesized wet band; keeps DC out of the noise.
const WET_LOW_CUT_HZ: f64 = 50.0;
const ATTACK_MS: f64 = 3.0;
const FADE_MS: f64 = 2.0;
/// Envelope level at the start of phase 2, relative to the burst.
const PHASE2_LEVEL: f64 = 0.5;
const PHASE3_START_LEVEL: f64 = 1.0;
const PHASE3_END_LEVEL: f64 = 0.4;

/// Voiced phase-3 tail: a damped sinusoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoicedTail {
    pub duration_ms: f64,
    pub f0_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoughSynthesisParams {
    pub phase1_ms: f64,
    pub phase2_ms: f64,
    pub phase3: Option<VoicedTail>,
    /// Phase-2 noise in the wet band (below 750 Hz) when set, else 1500–2250 Hz.
    pub wet: bool,
    /// RMS level of the explosive burst.
    pub peak_amplitude: f64,
    /// Time constant of the phase-2 exponential decay.
    pub decay_ms: f64,
}

fn in_range(name: &str, v: f64, (lo, hi): (f64, f64)) -> Result<()> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {v} outside [{lo}, {hi}]")))
    }
}

impl CoughSynthesisParams {
    /// Draws durations, voicing and decay uniformly from their allowed ranges.
    pub fn random(rng: &mut impl Rng, wet_probability: f64, voiced_probability: f64, peak_amplitude: f64) -> Self {
        let phase1_ms = rng.random_range(PHASE1_MS.0..=PHASE1_MS.1);
        let phase2_ms = rng.random_range(PHASE2_MS.0..=PHASE2_MS.1);
        let wet = rng.random_bool(wet_probability.clamp(0.0, 1.0));
        let phase3 = rng.random_bool(voiced_probability.clamp(0.0, 1.0)).then(|| VoicedTail {
            duration_ms: rng.random_range(PHASE3_MS.0..=PHASE3_MS.1),
            f0_hz: rng.random_range(VOICED_F0_HZ.0..=VOICED_F0_HZ.1),
        });
        // phase 2 ends at 40-60 % of its starting envelope
        let end_level: f64 = rng.random_range(0.4..=0.6);
        Self {
            phase1_ms,
            phase2_ms,
            phase3,
            wet,
            peak_amplitude,
            decay_ms: phase2_ms / (1.0 / end_level).ln(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        in_range("phase1_ms", self.phase1_ms, PHASE1_MS)?;
        in_range("phase2_ms", self.phase2_ms, PHASE2_MS)?;
        if let Some(v) = self.phase3 {
            in_range("phase3_ms", v.duration_ms, PHASE3_MS)?;
            in_range("f0_hz", v.f0_hz, VOICED_F0_HZ)?;
        }
        if !(self.peak_amplitude > 0.0 && self.peak_amplitude.is_finite()) {
            return Err(Error::invalid(format!(
                "peak_amplitude must be > 0, got {}",
                self.peak_amplitude
            )));
        }
        if !(self.decay_ms > 0.0 && self.decay_ms.is_finite()) {
            return Err(Error::invalid(format!("decay_ms must be > 0, got {}", self.decay_ms)));
        }
        if self.total_ms() > MAX_COUGH_MS {
            return Err(Error::invalid(format!(
                "cough lasts {} ms, above {MAX_COUGH_MS}",
                self.total_ms()
            )));
        }
        Ok(())
    }

    pub fn total_ms(&self) -> f64 {
        self.phase1_ms + self.phase2_ms + self.phase3.map_or(0.0, |v| v.duration_ms)
    }
}

/// A synthesized cough fragment and its exact ground truth, whose sample
/// indices are relative to the start of `samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCough {
    pub samples: Vec<f64>,
    pub truth: CoughSegment,
    pub wet: bool,
}

impl SynthCough {
    /// Returns the ground truth moved to start at `offset`.
    pub fn truth_at(&self, offset: usize) -> CoughSegment {
        let mut seg = self.truth.clone();
        seg.start_sample += offset;
        seg.end_sample += offset;
        for p in &mut seg.phases {
            p.start += offset;
            p.end += offset;
        }
        seg
    }
}

fn samples_for(ms: f64, fs: u32) -> usize {
    (ms * fs as f64 / 1000.0).round() as usize
}

/// Synthesizes one cough: a broadband burst with a fast attack, exponentially
/// decaying band-limited noise, and an optional damped sinusoid at `f0`.
pub fn synth_cough(params: &CoughSynthesisParams, fs: u32, seed: u64) -> Result<SynthCough> {
    if fs != CANONICAL_RATE_HZ {
        return Err(Error::invalid(format!(
            "synthesis runs at {CANONICAL_RATE_HZ} Hz, got {fs}"
        )));
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = samples_for(params.phase1_ms, fs);
    let n2 = samples_for(params.phase2_ms, fs);
    let n3 = params.phase3.map_or(0, |v| samples_for(v.duration_ms, fs));
    let dt = 1.0 / fs as f64;

    let mut samples = Vec::with_capacity(n1 + n2 + n3);
    let attack = samples_for(ATTACK_MS, fs).max(1);
    for (i, w) in white(&mut rng, n1).into_iter().enumerate() {
        let env = ((i + 1) as f64 / attack as f64).min(1.0);
        samples.push(env * w);
    }

    let (lo, hi) = if params.wet {
        (WET_LOW_CUT_HZ, WET_BAND_HZ.1)
    } else {
        DRY_BAND_HZ
    };
    let tau = params.decay_ms / 1000.0;
    for (i, w) in band_noise(&mut rng, n2, fs, lo, hi).into_iter().enumerate() {
        samples.push(PHASE2_LEVEL * (-(i as f64) * dt / tau).exp() * w);
    }

    if let Some(v) = params.phase3 {
        let tau3 = (v.duration_ms / 1000.0) / (PHASE3_START_LEVEL / PHASE3_END_LEVEL).ln();
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        for i in 0..n3 {
            let t = i as f64 * dt;
            samples.push(PHASE3_START_LEVEL * (-t / tau3).exp() * (2.0 * PI * v.f0_hz * t + phi).sin());
        }
    }

    let fade = samples_for(FADE_MS, fs).min(samples.len());
    let len = samples.len();
    for k in 0..fade {
        samples[len - 1 - k] *= k as f64 / fade as f64;
    }
    samples.iter_mut().for_each(|s| *s *= params.peak_amplitude);

    let mut phases = vec![
        PhaseBoundary {
            phase: Phase::Explosive,
            start: 0,
            end: n1,
        },
        PhaseBoundary {
            phase: Phase::Intermediate,
            start: n1,
            end: n1 + n2,
        },
    ];
    if n3 > 0 {
        phases.push(PhaseBoundary {
            phase: Phase::Voiced,
            start: n1 + n2,
            end: len,
        });
    }
    let truth = CoughSegment {
        start_sample: 0,
        end_sample: len,
        sample_rate_hz: fs,
        phases,
        pattern: if n3 > 0 {
            CoughPattern::ThreePhase
        } else {
            CoughPattern::TwoPhase
        },
        peak_amplitude: samples.iter().fold(0.0, |m, s| m.max(s.abs())),
        duration_ms: len as f64 * 1000.0 / fs as f64,
        split: false,
    };
    Ok(SynthCough {
        samples,
        truth,
        wet: params.wet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: u32 = CANONICAL_RATE_HZ;

    fn params(wet: bool, voiced: bool) -> CoughSynthesisParams {
        CoughSynthesisParams {
            phase1_ms: 50.0,
            phase2_ms: 200.0,
            phase3: voiced.then_some(VoicedTail {
                duration_ms: 100.0,
                f0_hz: 200.0,
            }),
            wet,
            peak_amplitude: 0.2,
            decay_ms: 250.0,
        }
    }

    /// Energy in `[lo, hi)` Hz by a direct DFT, independent of the FFT path.
    fn dft_band(x: &[f64], lo: f64, hi: f64) -> f64 {
        let n = x.len();
        let mut total = 0.0;
        for k in 0..=n / 2 {
            let f = k as f64 * FS as f64 / n as f64;
            if f < lo || f >= hi {
                continue;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * t % n) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            total += re * re + im * im;
        }
        total
    }

    #[test]
    fn wet_phase2_energy_sits_low() {
        let c = synth_cough(&params(true, false), FS, 11).unwrap();
        let p2 = c.truth.phase(Phase::Intermediate).unwrap();
        let x = &c.samples[p2.start..p2.end];
        let ratio = dft_band(x, 0.0, 750.0) / dft_band(x, 1500.0, 2250.0);
        assert!(ratio > 3.0, "ratio {ratio}");
        let c = synth_cough(&params(false, false), FS, 11).unwrap();
        let p2 = c.truth.phase(Phase::Intermediate).unwrap();
        let x = &c.samples[p2.start..p2.end];
        let ratio = dft_band(x, 0.0, 750.0) / dft_band(x, 1500.0, 2250.0);
        assert!(ratio < 1.0 / 3.0, "ratio {ratio}");
    }

    #[test]
    fn ground_truth_layout() {
        let c = synth_cough(&params(true, false), FS, 1).unwrap();
        assert_eq!(c.truth.pattern, CoughPattern::TwoPhase);
        assert_eq!(c.truth.phases.len(), 2);
        assert_eq!(c.truth.end_sample, c.samples.len());
        assert_eq!(c.truth.phases[0].end, 1103);
        assert!(c.truth.is_consistent());

        let c = synth_cough(&params(false, true), FS, 1).unwrap();
        assert_eq!(c.truth.pattern, CoughPattern::ThreePhase);
        assert_eq!(c.truth.phases[2].start, 1103 + 4410);
        assert_eq!(c.samples.len(), 1103 + 4410 + 2205);
        assert!(c.truth.is_consistent());
        let moved = c.truth_at(100);
        assert_eq!(moved.phases[2].end, 100 + c.samples.len());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_cough(&params(true, true), FS, 9).unwrap();
        let b = synth_cough(&params(true, true), FS, 9).unwrap();
        let c = synth_cough(&params(true, true), FS, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = params(true, true);
        p.phase1_ms = 10.0;
        assert!(synth_cough(&p, FS, 0).is_err());
        let mut p = params(true, true);
        p.phase3 = Some(VoicedTail {
            duration_ms: 80.0,
            f0_hz: 50.0,
        });
        assert!(synth_cough(&p, FS, 0).is_err());
        let mut p = params(true, true);
        p.decay_ms = 0.0;
        assert!(synth_cough(&p, FS, 0).is_err());
        assert!(synth_cough(&params(true, true), 16_000, 0).is_err());
    }

    #[test]
    fn random_params_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let p = CoughSynthesisParams::random(&mut rng, 0.5, 0.5, 0.2);
            p.validate().unwrap();
            assert!(p.total_ms() <= 500.0);
        }
    }
}
