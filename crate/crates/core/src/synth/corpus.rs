use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cough::{synth_cough, CoughSynthesisParams};
use super::noise::pink_noise;
use crate::detect::CoughSegment;
use crate::dsp::{save_wav, AudioClip, CANONICAL_RATE_HZ};
use crate::error::{Error, Result};
use crate::features::{DatasetManifest, ManifestEntry, SensorRecord};

const LEAD_S: (f64, f64) = (0.3, 0.6);
const GAP_S: (f64, f64) = (0.35, 0.8);
const BURST_RMS: (f64, f64) = (0.12, 0.2);
const MAX_PEAK: f64 = 0.95;

/// A normal distribution truncated by clamping to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampedNormal {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl ClampedNormal {
    pub const fn new(mean: f64, std: f64, min: f64, max: f64) -> Self {
        Self { mean, std, min, max }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.std >= 0.0 && self.min <= self.max && self.mean.is_finite()) {
            return Err(Error::invalid(format!("bad {name} distribution {self:?}")));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let v = Normal::new(self.mean, self.std).expect("validated std").sample(rng);
        v.clamp(self.min, self.max)
    }
}

/// Corpus conventions for one illness class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub name: String,
    pub wet_probability: f64,
    pub voiced_probability: f64,
    pub temp_c: ClampedNormal,
    pub airflow_peak_lps: ClampedNormal,
    pub airflow_volume_l: ClampedNormal,
    /// Inclusive range of coughs per clip.
    pub coughs_per_clip: (usize, usize),
}

impl ClassProfile {
    pub fn validate(&self) -> Result<()> {
        for (n, p) in [
            ("wet_probability", self.wet_probability),
            ("voiced_probability", self.voiced_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{}: {n} {p} outside [0, 1]", self.name)));
            }
        }
        self.temp_c.validate("temp_c")?;
        self.airflow_peak_lps.validate("airflow_peak_lps")?;
        self.airflow_volume_l.validate("airflow_volume_l")?;
        let (lo, hi) = self.coughs_per_clip;
        if lo == 0 || lo > hi {
            return Err(Error::invalid(format!("{}: coughs_per_clip {lo}..={hi}", self.name)));
        }
        Ok(())
    }

    /// The three built-in classes: `covid_like`, `flu_like` and `healthy`.
    pub fn defaults() -> Vec<ClassProfile> {
        vec![
            ClassProfile {
                name: "covid_like".into(),
                wet_probability: 0.15,
                voiced_probability: 0.5,
                temp_c: ClampedNormal::new(38.8, 0.5, 37.8, 40.5),
                airflow_peak_lps: ClampedNormal::new(4.5, 0.6, 1.0, 12.0),
                airflow_volume_l: ClampedNormal::new(2.6, 0.4, 0.5, 6.0),
                coughs_per_clip: (2, 3),
            },
            ClassProfile {
                name: "flu_like".into(),
                wet_probability: 0.6,
                voiced_probability: 0.5,
                temp_c: ClampedNormal::new(38.5, 0.5, 37.5, 40.5),
                airflow_peak_lps: ClampedNormal::new(6.5, 0.6, 1.0, 12.0),
                airflow_volume_l: ClampedNormal::new(3.4, 0.4, 0.5, 6.0),
                coughs_per_clip: (1, 3),
            },
            ClassProfile {
                name: "healthy".into(),
                wet_probability: 0.5,
                voiced_probability: 0.5,
                temp_c: ClampedNormal::new(36.8, 0.3, 36.0, 37.5),
                airflow_peak_lps: ClampedNormal::new(8.5, 0.7, 1.0, 12.0),
                airflow_volume_l: ClampedNormal::new(4.3, 0.5, 0.5, 6.0),
                coughs_per_clip: (1, 1),
            },
        ]
    }
}

/// Ground truth for one synthesized cough inside a clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCough {
    pub wet: bool,
    #[serde(flatten)]
    pub segment: CoughSegment,
}

/// One line of `truth.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipTruth {
    pub id: String,
    pub label: String,
    pub coughs: Vec<TruthCough>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub id: String,
    pub label: String,
    pub clip: AudioClip,
    pub sensor: SensorRecord,
    pub coughs: Vec<TruthCough>,
}

impl SynthClip {
    pub fn truth(&self) -> ClipTruth {
        ClipTruth {
            id: self.id.clone(),
            label: self.label.clone(),
            coughs: self.coughs.clone(),
        }
    }
}

pub fn clip_id(index: usize) -> String {
    format!("clip-{index:05}")
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

/// Generates clip `index` of a corpus. Clip `i` uses profile `i % profiles.len()`
/// and its own RNG stream, so clips can be produced in any order.
///
/// `snr_db = f64::INFINITY` yields noiseless clips.
pub fn synth_clip(profiles: &[ClassProfile], index: usize, snr_db: f64, seed: u64) -> Result<SynthClip> {
    if profiles.is_empty() {
        return Err(Error::invalid("at least one class profile is required"));
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("snr_db is NaN"));
    }
    let profile = &profiles[index % profiles.len()];
    profile.validate()?;
    let fs = CANONICAL_RATE_HZ;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);

    let secs = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| (rng.random_range(lo..=hi) * fs as f64).round() as usize;
    let n_coughs = rng.random_range(profile.coughs_per_clip.0..=profile.coughs_per_clip.1);
    let mut samples = vec![0.0; secs(&mut rng, LEAD_S)];
    let mut coughs = Vec::with_capacity(n_coughs);
    for k in 0..n_coughs {
        if k > 0 {
            samples.resize(samples.len() + secs(&mut rng, GAP_S), 0.0);
        }
        let level = rng.random_range(BURST_RMS.0..=BURST_RMS.1);
        let params = CoughSynthesisParams::random(&mut rng, profile.wet_probability, profile.voiced_probability, level);
        let cough = synth_cough(&params, fs, rng.random())?;
        coughs.push(TruthCough {
            wet: cough.wet,
            segment: cough.truth_at(samples.len()),
        });
        samples.extend_from_slice(&cough.samples);
    }
    samples.resize(samples.len() + secs(&mut rng, LEAD_S), 0.0);

    let sensor = SensorRecord {
        body_temp_c: Some(round_to(profile.temp_c.sample(&mut rng), 2)),
        airflow_peak_lps: Some(round_to(profile.airflow_peak_lps.sample(&mut rng), 3)),
        airflow_volume_l: Some(round_to(profile.airflow_volume_l.sample(&mut rng), 3)),
    };

    if snr_db.is_finite() {
        let (energy, count) = coughs.iter().fold((0.0, 0usize), |(e, n), c| {
            let s = &samples[c.segment.start_sample..c.segment.end_sample];
            (e + s.iter().map(|v| v * v).sum::<f64>(), n + s.len())
        });
        let noise_rms = (energy / count as f64 / 10f64.powf(snr_db / 10.0)).sqrt();
        let noise = pink_noise(&mut rng, samples.len());
        for (s, n) in samples.iter_mut().zip(noise) {
            *s += noise_rms * n;
        }
    }

    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let gain = if peak > MAX_PEAK { MAX_PEAK / peak } else { 1.0 };
    if gain != 1.0 {
        samples.iter_mut().for_each(|s| *s *= gain);
    }
    for c in &mut coughs {
        let seg = &mut c.segment;
        seg.peak_amplitude = samples[seg.start_sample..seg.end_sample]
            .iter()
            .fold(0.0, |m, s| m.max(s.abs()));
    }

    Ok(SynthClip {
        id: clip_id(index),
        label: profile.name.clone(),
        clip: AudioClip::new(samples, fs)?,
        sensor,
        coughs,
    })
}

/// Generates `n_clips` clips in parallel; output order is by index.
pub fn synth_clips(profiles: &[ClassProfile], n_clips: usize, snr_db: f64, seed: u64) -> Result<Vec<SynthClip>> {
    (0..n_clips)
        .into_par_iter()
        .map(|i| synth_clip(profiles, i, snr_db, seed))
        .collect()
}

#[derive(Debug, Clone)]
pub struct CorpusSummary {
    pub manifest: DatasetManifest,
    pub truth: Vec<ClipTruth>,
}

/// Writes `clips/*.wav`, `manifest.jsonl`, `truth.jsonl` and `README` under `out_dir`.
pub fn synth_corpus(
    profiles: &[ClassProfile],
    n_clips: usize,
    snr_db: f64,
    seed: u64,
    out_dir: impl AsRef<Path>,
) -> Result<CorpusSummary> {
    if n_clips == 0 {
        return Err(Error::invalid("n_clips must be >= 1"));
    }
    let out_dir = out_dir.as_ref();
    let clips_dir = out_dir.join("clips");
    std::fs::create_dir_all(&clips_dir).map_err(|e| Error::io(&clips_dir, e))?;

    let written: Vec<(ManifestEntry, ClipTruth)> = (0..n_clips)
        .into_par_iter()
        .map(|i| {
            let clip = synth_clip(profiles, i, snr_db, seed)?;
            let rel = format!("clips/{}.wav", clip.id);
            save_wav(&clip.clip, out_dir.join(&rel))?;
            let entry = ManifestEntry {
                id: clip.id.clone(),
                wav: Some(rel),
                label: clip.label.clone(),
                sensor: clip.sensor,
            };
            Ok((entry, clip.truth()))
        })
        .collect::<Result<_>>()?;
    let (entries, truth): (Vec<_>, Vec<_>) = written.into_iter().unzip();

    let classes = profiles.iter().map(|p| p.name.clone()).collect::<Vec<_>>();
    let manifest = DatasetManifest::new(entries, Some(classes), out_dir)?;
    manifest.write(out_dir.join("manifest.jsonl"))?;

    let truth_path = out_dir.join("truth.jsonl");
    let mut text = String::new();
    for t in &truth {
        text.push_str(&serde_json::to_string(t).expect("truth serializes"));
        text.push('\n');
    }
    std::fs::write(&truth_path, text).map_err(|e| Error::io(&truth_path, e))?;

    let readme_path = out_dir.join("README");
    std::fs::write(&readme_path, corpus_readme(profiles, n_clips, snr_db, seed))
        .map_err(|e| Error::io(&readme_path, e))?;
    Ok(CorpusSummary { manifest, truth })
}

fn corpus_readme(profiles: &[ClassProfile], n_clips: usize, snr_db: f64, seed: u64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Synthetic cough corpus");
    let _ = writeln!(s, "======================\n");
    let _ = writeln!(
        s,
        "clips: {n_clips}  seed: {seed}  snr_db: {snr_db}  sample_rate_hz: {CANONICAL_RATE_HZ}\n"
    );
    let _ = writeln!(
        s,
        "Every number below is a corpus convention chosen so that the tests are\n\
         meaningful. None of it is a clinical claim.\n"
    );
    let _ = writeln!(s, "Cough model");
    let _ = writeln!(s, "  phase 1: Gaussian white burst, 30-80 ms, 3 ms linear attack");
    let _ = writeln!(
        s,
        "  phase 2: band-limited noise, 100-300 ms, envelope 0.5*exp(-t/tau),"
    );
    let _ = writeln!(
        s,
        "           ending at 40-60 % of its start; wet 50-750 Hz, dry 1500-2250 Hz"
    );
    let _ = writeln!(
        s,
        "  phase 3: optional damped sinusoid, 40-120 ms, f0 150-300 Hz, amplitude 1.0 -> 0.4"
    );
    let _ = writeln!(s, "  2 ms linear fade-out; burst RMS 0.12-0.2\n");
    let _ = writeln!(s, "Clip layout");
    let _ = writeln!(s, "  0.3-0.6 s lead-in and trailer, 0.35-0.8 s between coughs");
    let _ = writeln!(
        s,
        "  pink background noise scaled to snr_db against mean in-cough power"
    );
    let _ = writeln!(s, "  clips whose peak exceeds {MAX_PEAK} are scaled down as a whole");
    let _ = writeln!(s, "  clip i uses profile i mod {} and RNG stream i\n", profiles.len());
    let _ = writeln!(s, "Profiles");
    for p in profiles {
        let _ = writeln!(
            s,
            "  {}: wet p={} voiced p={} coughs {}..={} temp N({}, {}) in [{}, {}] peak flow N({}, {}) L/s volume N({}, {}) L",
            p.name,
            p.wet_probability,
            p.voiced_probability,
            p.coughs_per_clip.0,
            p.coughs_per_clip.1,
            p.temp_c.mean,
            p.temp_c.std,
            p.temp_c.min,
            p.temp_c.max,
            p.airflow_peak_lps.mean,
            p.airflow_peak_lps.std,
            p.airflow_volume_l.mean,
            p.airflow_volume_l.std,
        );
    }
    let _ = writeln!(s, "\nFiles");
    let _ = writeln!(s, "  clips/*.wav     mono 16-bit PCM");
    let _ = writeln!(
        s,
        "  manifest.jsonl  id, wav, label, temp_c, airflow_peak_lps, airflow_volume_l"
    );
    let _ = writeln!(
        s,
        "  truth.jsonl     per clip: cough sample ranges, phases, pattern, wet flag"
    );
    s
}
