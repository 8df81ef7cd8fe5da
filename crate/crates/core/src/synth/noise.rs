use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub(crate) fn white(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Scales `x` in place to unit RMS; all-zero input is left untouched.
pub(crate) fn normalize_rms(x: &mut [f64]) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
}

/// Unit-RMS Gaussian noise restricted to `[lo_hz, hi_hz)` by zeroing DFT bins.
pub fn band_noise(rng: &mut impl Rng, n: usize, fs: u32, lo_hz: f64, hi_hz: f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = white(rng, n).into_iter().map(|v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = fs as f64 / n as f64;
    for (k, c) in buf.iter_mut().enumerate() {
        // bins above n/2 mirror the negative frequencies
        let f = k.min(n - k) as f64 * df;
        if f < lo_hz || f >= hi_hz {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut out: Vec<f64> = buf.into_iter().map(|c| c.re).collect();
    normalize_rms(&mut out);
    out
}

/// Zero-mean, unit-RMS pink (1/f) noise from Paul Kellet's refined filter.
pub fn pink_noise(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    const WARMUP: usize = 4096;
    let mut b = [0.0f64; 7];
    let mut out = Vec::with_capacity(n);
    for i in 0..n + WARMUP {
        let w: f64 = rng.sample(StandardNormal);
        b[0] = 0.99886 * b[0] + w * 0.0555179;
        b[1] = 0.99332 * b[1] + w * 0.0750759;
        b[2] = 0.96900 * b[2] + w * 0.1538520;
        b[3] = 0.86650 * b[3] + w * 0.3104856;
        b[4] = 0.55000 * b[4] + w * 0.5329522;
        b[5] = -0.7616 * b[5] - w * 0.0168980;
        let y = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362;
        b[6] = w * 0.115926;
        if i >= WARMUP {
            out.push(y);
        }
    }
    let mean = out.iter().sum::<f64>() / n.max(1) as f64;
    out.iter_mut().for_each(|v| *v -= mean);
    normalize_rms(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{band_energy, periodogram};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn band_noise_stays_in_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = band_noise(&mut rng, 4096, 22_050, 1500.0, 2250.0);
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / 4096.0).sqrt();
        assert!((rms - 1.0).abs() < 1e-12);
        let spec = periodogram(&x, 4096, 22_050).unwrap();
        let inside = band_energy(&spec, 1490.0, 2260.0).unwrap();
        assert!(inside / spec.total_energy() > 0.999);
    }

    #[test]
    fn pink_noise_tilts_down() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = pink_noise(&mut rng, 1 << 16);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        assert!(mean.abs() < 1e-12);
        let mut low = 0.0;
        let mut high = 0.0;
        for frame in x.chunks_exact(4096) {
            let spec = periodogram(frame, 4096, 22_050).unwrap();
            low += band_energy(&spec, 100.0, 200.0).unwrap();
            high += band_energy(&spec, 3200.0, 3300.0).unwrap();
        }
        // equal-width bands 16x apart in frequency: expect roughly a 16x drop
        let ratio = low / high;
        assert!(ratio > 6.0 && ratio < 40.0, "ratio {ratio}");
    }
}
