//! Audio I/O and spectral analysis.

mod audio;
mod frame;
mod mel;
mod mfcc;
mod spectrum;

pub use audio::{decode_wav_bytes, encode_wav_bytes, load_wav, resample, save_wav, AudioClip, CANONICAL_RATE_HZ};
pub use frame::{frame_samples, frame_signal, zcr, FrameSpec, Window};
pub use mel::{build_mel_filterbank, hz_to_mel, mel_to_hz, MelFilterBank};
pub use mfcc::{
    dct2_orthonormal, log_mel_spectrogram, mfcc, MelAnalyzer, MfccConfig, MfccExtractor, MfccMatrix,
    DEFAULT_MEL_FILTERS, LOG_ENERGY_FLOOR,
};
pub use spectrum::{band_energy, periodogram, shannon_entropy, Periodogram, PowerSpectrum};

pub(crate) use frame::ms_to_samples;
