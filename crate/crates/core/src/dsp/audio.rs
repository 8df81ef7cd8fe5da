//! Mono PCM clips, 16-bit WAV I/O and linear resampling.

use std::io::{Cursor, Read, Seek, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical analysis rate.
pub const CANONICAL_RATE_HZ: u32 = 22_050;

const I16_SCALE: f64 = 32_768.0;

/// Mono audio with amplitudes nominally in [-1, 1].
///
/// Samples outside the nominal range are accepted; `clipped` records that the
/// clip touched or exceeded full scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    clipped: bool,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("audio clip must not be empty"));
        }
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        let clipped = samples.iter().any(|s| s.abs() >= 1.0);
        Ok(Self {
            samples,
            sample_rate_hz,
            clipped,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_clipped(&self) -> bool {
        self.clipped
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Copy with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|s| s * gain).collect(), self.sample_rate_hz)
    }
}

/// Reads a 16-bit PCM WAV file, averaging stereo to mono.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_wav(std::io::BufReader::new(file))
}

pub fn decode_wav_bytes(bytes: &[u8]) -> Result<AudioClip> {
    read_wav(Cursor::new(bytes))
}

fn read_wav<R: Read>(reader: R) -> Result<AudioClip> {
    let mut wav = hound::WavReader::new(reader).map_err(|e| Error::Format(e.to_string()))?;
    let spec = wav.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Format(format!(
            "unsupported encoding: {:?} {}-bit (only 16-bit PCM is accepted)",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(Error::Format(format!(
            "unsupported channel count {channels} (mono or stereo only)"
        )));
    }
    let raw: Vec<i16> = wav
        .samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Format(e.to_string()))?;
    if raw.is_empty() {
        return Err(Error::Format("WAV file holds no samples".into()));
    }
    let mut clipped = false;
    let samples: Vec<f64> = raw
        .chunks(channels)
        .map(|frame| {
            clipped |= frame.iter().any(|&s| s == i16::MAX || s == i16::MIN);
            frame.iter().map(|&s| s as f64 / I16_SCALE).sum::<f64>() / channels as f64
        })
        .collect();
    let mut clip = AudioClip::new(samples, spec.sample_rate)?;
    clip.clipped |= clipped;
    Ok(clip)
}

/// Writes a mono 16-bit PCM WAV. Samples are quantized with rounding and
/// saturated at full scale.
pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_wav(clip, std::io::BufWriter::new(file)).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format(other.to_string()),
    })
}

pub fn encode_wav_bytes(clip: &AudioClip) -> Result<Vec<u8>> {
    let mut cursor = Cursor::new(Vec::new());
    write_wav(clip, &mut cursor).map_err(|e| Error::Format(e.to_string()))?;
    Ok(cursor.into_inner())
}

fn write_wav<W: Write + Seek>(clip: &AudioClip, writer: W) -> std::result::Result<(), hound::Error> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut wav = hound::WavWriter::new(writer, spec)?;
    for &s in &clip.samples {
        wav.write_sample(quantize(s))?;
    }
    wav.finalize()
}

pub(crate) fn quantize(sample: f64) -> i16 {
    (sample * I16_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

/// Linear-interpolation resampler. Output length is `round(len * target / source)`.
pub fn resample(clip: &AudioClip, target_hz: u32) -> Result<AudioClip> {
    if target_hz == 0 {
        return Err(Error::invalid("target sample rate must be positive"));
    }
    let source_hz = clip.sample_rate_hz;
    if source_hz == target_hz {
        return Ok(clip.clone());
    }
    let src = &clip.samples;
    let out_len = ((src.len() as f64 * target_hz as f64 / source_hz as f64).round() as usize).max(1);
    let step = source_hz as f64 / target_hz as f64;
    let last = src.len() - 1;
    let out = (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let idx = pos.floor() as usize;
            if idx >= last {
                return src[last];
            }
            let frac = pos - idx as f64;
            src[idx] + (src[idx + 1] - src[idx]) * frac
        })
        .collect();
    let mut resampled = AudioClip::new(out, target_hz)?;
    resampled.clipped |= clip.clipped;
    Ok(resampled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn silence_file_round_trips_to_zero_clip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.wav");
        let clip = AudioClip::new(vec![0.0; 22_050], 22_050).unwrap();
        save_wav(&clip, &path).unwrap();
        let loaded = load_wav(&path).unwrap();
        assert_eq!(loaded.len(), 22_050);
        assert!(loaded.samples().iter().all(|&s| s == 0.0));
        assert_eq!(loaded.sample_rate_hz(), 22_050);
    }

    #[test]
    fn max_positive_sample_scales_by_inverse_32768() {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 22_050,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut cursor = Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
            w.write_sample(32_767i16).unwrap();
            w.write_sample(0i16).unwrap();
            w.finalize().unwrap();
        }
        let clip = decode_wav_bytes(cursor.get_ref()).unwrap();
        assert_eq!(clip.samples()[0], 32_767.0 / 32_768.0);
        assert!(clip.is_clipped());
    }

    #[test]
    fn stereo_is_averaged() {
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut cursor = Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
            for (l, r) in [(1000i16, 3000i16), (-2000, 0)] {
                w.write_sample(l).unwrap();
                w.write_sample(r).unwrap();
            }
            w.finalize().unwrap();
        }
        let clip = decode_wav_bytes(cursor.get_ref()).unwrap();
        assert_eq!(clip.samples(), &[2000.0 / 32768.0, -1000.0 / 32768.0]);
    }

    #[test]
    fn rejects_float_and_8bit_and_garbage() {
        let mut cursor = Cursor::new(Vec::new());
        {
            let spec = hound::WavSpec {
                channels: 1,
                sample_rate: 8_000,
                bits_per_sample: 32,
                sample_format: hound::SampleFormat::Float,
            };
            let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
            w.write_sample(0.5f32).unwrap();
            w.finalize().unwrap();
        }
        assert!(matches!(decode_wav_bytes(cursor.get_ref()), Err(Error::Format(_))));

        let mut cursor = Cursor::new(Vec::new());
        {
            let spec = hound::WavSpec {
                channels: 1,
                sample_rate: 8_000,
                bits_per_sample: 8,
                sample_format: hound::SampleFormat::Int,
            };
            let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
            w.write_sample(3i8).unwrap();
            w.finalize().unwrap();
        }
        assert!(matches!(decode_wav_bytes(cursor.get_ref()), Err(Error::Format(_))));

        assert!(matches!(decode_wav_bytes(b"RIFF\x00\x00"), Err(Error::Format(_))));
        assert!(matches!(
            decode_wav_bytes(b"not a wav file at all"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn wav_round_trip_within_one_lsb() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lsb = 1.0 / 32_768.0;
        for _ in 0..100 {
            let n = rng.random_range(1..2_000);
            let samples: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let clip = AudioClip::new(samples, 22_050).unwrap();
            let back = decode_wav_bytes(&encode_wav_bytes(&clip).unwrap()).unwrap();
            for (a, b) in clip.samples().iter().zip(back.samples()) {
                assert!((a - b).abs() <= lsb, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn resample_identity_and_zero_target() {
        let clip = AudioClip::new(vec![0.1, 0.2, 0.3], 16_000).unwrap();
        assert_eq!(resample(&clip, 16_000).unwrap(), clip);
        assert!(matches!(resample(&clip, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn resample_constant_stays_constant() {
        let clip = AudioClip::new(vec![0.25; 1_001], 44_100).unwrap();
        for target in [8_000, 22_050, 48_000] {
            let out = resample(&clip, target).unwrap();
            assert_eq!(out.len(), (1_001.0 * target as f64 / 44_100.0).round() as usize);
            assert!(out.samples().iter().all(|&s| (s - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn resample_halving_preserves_sine() {
        let src_hz = 44_100.0;
        let sine: Vec<f64> = (0..44_100)
            .map(|i| (2.0 * PI * 100.0 * i as f64 / src_hz).sin())
            .collect();
        let clip = AudioClip::new(sine, 44_100).unwrap();
        let out = resample(&clip, 22_050).unwrap();
        assert_eq!(out.len(), 22_050);
        for (i, &s) in out.samples().iter().enumerate() {
            let expected = (2.0 * PI * 100.0 * i as f64 / 22_050.0).sin();
            assert!((s - expected).abs() < 0.01, "sample {i}");
        }
    }

    #[test]
    fn resample_upsampling_sine_error_small() {
        let sine: Vec<f64> = (0..16_000)
            .map(|i| (2.0 * PI * 100.0 * i as f64 / 16_000.0).sin())
            .collect();
        let out = resample(&AudioClip::new(sine, 16_000).unwrap(), 22_050).unwrap();
        for (i, &s) in out.samples().iter().enumerate().take(out.len() - 2) {
            let expected = (2.0 * PI * 100.0 * i as f64 / 22_050.0).sin();
            assert!((s - expected).abs() < 0.01);
        }
    }

    #[test]
    fn new_rejects_empty_and_nan() {
        assert!(AudioClip::new(vec![], 22_050).is_err());
        assert!(AudioClip::new(vec![f64::NAN], 22_050).is_err());
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert!(AudioClip::new(vec![1.5], 22_050).unwrap().is_clipped());
    }
}
