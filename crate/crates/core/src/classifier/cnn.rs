use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{check_input, check_label, cross_entropy_delta, Network};
use crate::error::{Error, Result};

/// Shape of a small spectrogram CNN: `stages` of same-padded square
/// convolution, ReLU and 2×2 max pooling, then one dense layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnConfig {
    /// Time frames (rows) of the input log-mel image.
    pub frames: usize,
    pub mel_bands: usize,
    pub kernel: usize,
    /// Output channels of each convolution stage.
    pub channels: Vec<usize>,
    pub n_classes: usize,
}

impl CnnConfig {
    pub fn new(n_classes: usize) -> Self {
        Self {
            frames: 64,
            mel_bands: 26,
            kernel: 3,
            channels: vec![8, 16],
            n_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(Error::invalid(format!("kernel size must be odd, got {}", self.kernel)));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::invalid(format!("bad channel list {:?}", self.channels)));
        }
        if self.n_classes < 2 {
            return Err(Error::invalid("at least 2 output classes are required"));
        }
        let (h, w) = self.pooled_shape(self.channels.len());
        if h == 0 || w == 0 {
            return Err(Error::invalid(format!(
                "{}x{} input vanishes after {} pooling stages",
                self.frames,
                self.mel_bands,
                self.channels.len()
            )));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.frames * self.mel_bands
    }

    /// Spatial shape after `stages` rounds of 2×2 pooling (floor).
    pub fn pooled_shape(&self, stages: usize) -> (usize, usize) {
        (self.frames >> stages, self.mel_bands >> stages)
    }

    fn flat_len(&self) -> usize {
        let (h, w) = self.pooled_shape(self.channels.len());
        h * w * self.channels.last().copied().unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        let k2 = self.kernel * self.kernel;
        let mut c_in = 1;
        let mut n = 0;
        for &c in &self.channels {
            n += c * c_in * k2 + c;
            c_in = c;
        }
        n + self.n_classes * self.flat_len() + self.n_classes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    config: CnnConfig,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass.
struct Trace {
    /// Input to each stage, `(channels, h, w)` row-major.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation conv output of each stage.
    pre: Vec<Vec<f64>>,
    /// For each pooled cell, the flat index of the winning conv cell.
    argmax: Vec<Vec<usize>>,
    flat: Vec<f64>,
    logits: Vec<f64>,
}

struct Stage {
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
    w_at: usize,
    b_at: usize,
}

impl CnnModel {
    pub fn new(config: CnnConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let k2 = config.kernel * config.kernel;
        let mut params = Vec::with_capacity(config.param_count());
        let mut c_in = 1;
        for &c in &config.channels {
            let (fan_in, fan_out) = (c_in * k2, c * k2);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..c * c_in * k2 {
                params.push(rng.random_range(-limit..=limit));
            }
            params.extend(std::iter::repeat_n(0.0, c));
            c_in = c;
        }
        let flat = config.flat_len();
        let limit = (6.0 / (flat + config.n_classes) as f64).sqrt();
        for _ in 0..flat * config.n_classes {
            params.push(rng.random_range(-limit..=limit));
        }
        params.extend(std::iter::repeat_n(0.0, config.n_classes));
        Ok(Self { config, params })
    }

    pub fn from_params(config: CnnConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.param_count() {
            return Err(Error::shape(
                format!("{} parameters", config.param_count()),
                params.len(),
            ));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Format("non-finite CNN parameter".into()));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    fn stages(&self) -> Vec<Stage> {
        let k2 = self.config.kernel * self.config.kernel;
        let mut out = Vec::new();
        let (mut h, mut w, mut c_in, mut at) = (self.config.frames, self.config.mel_bands, 1, 0);
        for &c_out in &self.config.channels {
            let w_at = at;
            let b_at = at + c_out * c_in * k2;
            out.push(Stage {
                c_in,
                c_out,
                h,
                w,
                w_at,
                b_at,
            });
            at = b_at + c_out;
            c_in = c_out;
            h /= 2;
            w /= 2;
        }
        out
    }

    fn dense_offset(&self) -> usize {
        let s = self.stages();
        let last = s.last().expect("at least one stage");
        last.b_at + last.c_out
    }

    fn conv(&self, s: &Stage, input: &[f64]) -> Vec<f64> {
        let k = self.config.kernel;
        let pad = k / 2;
        let (h, w) = (s.h, s.w);
        let mut out = vec![0.0; s.c_out * h * w];
        for co in 0..s.c_out {
            let plane = &mut out[co * h * w..(co + 1) * h * w];
            plane.iter_mut().for_each(|v| *v = self.params[s.b_at + co]);
            for ci in 0..s.c_in {
                let src = &input[ci * h * w..(ci + 1) * h * w];
                for ky in 0..k {
                    for kx in 0..k {
                        let wt = self.params[s.w_at + ((co * s.c_in + ci) * k + ky) * k + kx];
                        for y in 0..h {
                            let sy = y + ky;
                            if sy < pad || sy - pad >= h {
                                continue;
                            }
                            let src_row = &src[(sy - pad) * w..(sy - pad + 1) * w];
                            let dst_row = &mut plane[y * w..(y + 1) * w];
                            for (x, d) in dst_row.iter_mut().enumerate() {
                                let sx = x + kx;
                                if sx >= pad && sx - pad < w {
                                    *d += wt * src_row[sx - pad];
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn forward(&self, input: &[f64]) -> Trace {
        let mut inputs = Vec::new();
        let mut pre = Vec::new();
        let mut argmax = Vec::new();
        let mut x = input.to_vec();
        for s in self.stages() {
            let z = self.conv(&s, &x);
            let (h2, w2) = (s.h / 2, s.w / 2);
            let mut pooled = vec![0.0; s.c_out * h2 * w2];
            let mut winners = vec![0usize; s.c_out * h2 * w2];
            for c in 0..s.c_out {
                for py in 0..h2 {
                    for px in 0..w2 {
                        let mut best = c * s.h * s.w + 2 * py * s.w + 2 * px;
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let idx = c * s.h * s.w + (2 * py + dy) * s.w + 2 * px + dx;
                            if z[idx] > z[best] {
                                best = idx;
                            }
                        }
                        let o = (c * h2 + py) * w2 + px;
                        // relu and max commute
                        pooled[o] = z[best].max(0.0);
                        winners[o] = best;
                    }
                }
            }
            inputs.push(x);
            pre.push(z);
            argmax.push(winners);
            x = pooled;
        }
        let d_at = self.dense_offset();
        let flat_len = x.len();
        let c = self.config.n_classes;
        let b_at = d_at + c * flat_len;
        let logits = (0..c)
            .map(|o| {
                let row = &self.params[d_at + o * flat_len..d_at + (o + 1) * flat_len];
                self.params[b_at + o] + row.iter().zip(&x).map(|(w, a)| w * a).sum::<f64>()
            })
            .collect();
        Trace {
            inputs,
            pre,
            argmax,
            flat: x,
            logits,
        }
    }
}

impl Network for CnnModel {
    fn input_len(&self) -> usize {
        self.config.input_len()
    }

    fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_input(self.input_len(), input)?;
        Ok(self.forward(input).logits)
    }

    fn accumulate_gradient(&self, input: &[f64], label: usize, scale: f64, grad: &mut [f64]) -> Result<f64> {
        check_input(self.input_len(), input)?;
        check_label(label, self.n_classes())?;
        let trace = self.forward(input);
        let (loss, delta) = cross_entropy_delta(&trace.logits, label);

        let d_at = self.dense_offset();
        let flat_len = trace.flat.len();
        let b_at = d_at + self.config.n_classes * flat_len;
        let mut d_x = vec![0.0; flat_len];
        for (o, &d) in delta.iter().enumerate() {
            let d = scale * d;
            grad[b_at + o] += d;
            let row = d_at + o * flat_len;
            for i in 0..flat_len {
                grad[row + i] += d * trace.flat[i];
                d_x[i] += self.params[row + i] * d;
            }
        }

        let k = self.config.kernel;
        let pad = k / 2;
        for (si, s) in self.stages().iter().enumerate().rev() {
            let (h, w) = (s.h, s.w);
            let z = &trace.pre[si];
            let mut d_z = vec![0.0; z.len()];
            for (o, &win) in trace.argmax[si].iter().enumerate() {
                if z[win] > 0.0 {
                    d_z[win] += d_x[o];
                }
            }
            let x = &trace.inputs[si];
            let mut d_in = vec![0.0; x.len()];
            for co in 0..s.c_out {
                let dz = &d_z[co * h * w..(co + 1) * h * w];
                grad[s.b_at + co] += dz.iter().sum::<f64>();
                for ci in 0..s.c_in {
                    let src = &x[ci * h * w..(ci + 1) * h * w];
                    for ky in 0..k {
                        for kx in 0..k {
                            let wi = s.w_at + ((co * s.c_in + ci) * k + ky) * k + kx;
                            let wt = self.params[wi];
                            let mut acc = 0.0;
                            for y in 0..h {
                                let sy = y + ky;
                                if sy < pad || sy - pad >= h {
                                    continue;
                                }
                                let r = (sy - pad) * w;
                                for xx in 0..w {
                                    let sx = xx + kx;
                                    if sx >= pad && sx - pad < w {
                                        let g = dz[y * w + xx];
                                        acc += g * src[r + sx - pad];
                                        d_in[ci * h * w + r + sx - pad] += wt * g;
                                    }
                                }
                            }
                            grad[wi] += acc;
                        }
                    }
                }
            }
            d_x = d_in;
        }
        Ok(loss)
    }
}
