use rand::Rng;

use super::network::{check_input, check_label, cross_entropy_delta, Network};
use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: [usize; 2] = [32, 16];

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Fully connected network: logistic hidden layers and a softmax output.
///
/// Parameters are stored layer by layer, each as a row-major `out × in`
/// weight matrix followed by `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

pub(crate) fn param_count_for(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

fn glorot(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> f64 {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    rng.random_range(-limit..=limit)
}

impl MlpModel {
    /// `sizes` is `[inputs, hidden.., classes]` with at least two hidden layers.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        Self::validate_sizes(sizes)?;
        let mut params = Vec::with_capacity(param_count_for(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            for _ in 0..fan_in * fan_out {
                params.push(glorot(rng, fan_in, fan_out));
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        Self::validate_sizes(sizes)?;
        let expected = param_count_for(sizes);
        if params.len() != expected {
            return Err(Error::shape(format!("{expected} parameters"), params.len()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Format("non-finite MLP parameter".into()));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    fn validate_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 4 {
            return Err(Error::invalid(format!(
                "MLP needs input, at least two hidden layers and output; got sizes {sizes:?}"
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::invalid(format!("zero-width layer in {sizes:?}")));
        }
        if sizes[sizes.len() - 1] < 2 {
            return Err(Error::invalid("at least 2 output classes are required"));
        }
        Ok(())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Offsets of each layer's weights and biases in the flat vector.
    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.sizes.len() - 1);
        let mut at = 0;
        for w in self.sizes.windows(2) {
            out.push((at, at + w[0] * w[1]));
            at += w[0] * w[1] + w[1];
        }
        out
    }

    /// Activations of every layer; the last entry holds the logits.
    fn forward(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let offsets = self.layer_offsets();
        let n_layers = offsets.len();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(input.to_vec());
        for (l, &(w_at, b_at)) in offsets.iter().enumerate() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let prev = &acts[l];
            let mut z: Vec<f64> = self.params[b_at..b_at + n_out].to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &self.params[w_at + o * n_in..w_at + (o + 1) * n_in];
                *zo += row.iter().zip(prev).map(|(w, a)| w * a).sum::<f64>();
            }
            if l + 1 < n_layers {
                z.iter_mut().for_each(|v| *v = logistic(*v));
            }
            acts.push(z);
        }
        acts
    }

    /// Sets the output layer's weights and biases to zero.
    pub fn zero_output_layer(&mut self) {
        let (w_at, _) = *self.layer_offsets().last().expect("at least one layer");
        self.params[w_at..].iter_mut().for_each(|p| *p = 0.0);
    }

    /// Mutable view of the output-layer biases.
    pub fn output_biases_mut(&mut self) -> &mut [f64] {
        let (_, b_at) = *self.layer_offsets().last().expect("at least one layer");
        &mut self.params[b_at..]
    }
}

impl Network for MlpModel {
    fn input_len(&self) -> usize {
        self.sizes[0]
    }

    fn n_classes(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_input(self.input_len(), input)?;
        Ok(self.forward(input).pop().expect("output layer"))
    }

    fn accumulate_gradient(&self, input: &[f64], label: usize, scale: f64, grad: &mut [f64]) -> Result<f64> {
        check_input(self.input_len(), input)?;
        check_label(label, self.n_classes())?;
        let acts = self.forward(input);
        let offsets = self.layer_offsets();
        let (loss, mut delta) = cross_entropy_delta(acts.last().expect("output"), label);
        for l in (0..offsets.len()).rev() {
            let (w_at, b_at) = offsets[l];
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let prev = &acts[l];
            for o in 0..n_out {
                let d = scale * delta[o];
                grad[b_at + o] += d;
                let row = &mut grad[w_at + o * n_in..w_at + (o + 1) * n_in];
                row.iter_mut().zip(prev).for_each(|(g, a)| *g += d * a);
            }
            if l > 0 {
                let mut back = vec![0.0; n_in];
                for (o, &d) in delta.iter().enumerate() {
                    let row = &self.params[w_at + o * n_in..w_at + (o + 1) * n_in];
                    back.iter_mut().zip(row).for_each(|(b, w)| *b += w * d);
                }
                // logistic'(z) = a (1 - a)
                back.iter_mut().zip(prev).for_each(|(b, a)| *b *= a * (1.0 - a));
                delta = back;
            }
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_and_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = MlpModel::new(&[42, 32, 16, 3], &mut rng).unwrap();
        assert_eq!(m.params().len(), 42 * 32 + 32 + 32 * 16 + 16 + 16 * 3 + 3);
        let limit = (6.0f64 / 74.0).sqrt();
        assert!(m.params()[..42 * 32].iter().all(|w| w.abs() <= limit));
        assert!(m.params()[42 * 32..42 * 32 + 32].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(MlpModel::new(&[4, 8, 2], &mut rng).is_err());
        assert!(MlpModel::new(&[4, 0, 8, 2], &mut rng).is_err());
        let m = MlpModel::new(&[4, 8, 8, 2], &mut rng).unwrap();
        assert!(matches!(m.logits(&[1.0; 3]), Err(Error::Shape { .. })));
        assert!(MlpModel::from_params(&[4, 8, 8, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn zeroed_output_gives_uniform_memberships() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = MlpModel::new(&[5, 6, 4, 3], &mut rng).unwrap();
        m.zero_output_layer();
        let p = m.predict_memberships(&[0.3, -1.0, 2.0, 0.0, 1.0]).unwrap();
        for v in p.0 {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn output_bias_shift_leaves_memberships() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = MlpModel::new(&[5, 6, 4, 3], &mut rng).unwrap();
        let x = [0.3, -1.0, 2.0, 0.0, 1.0];
        let before = m.predict_memberships(&x).unwrap();
        m.output_biases_mut().iter_mut().for_each(|b| *b += 7.5);
        let after = m.predict_memberships(&x).unwrap();
        for (a, b) in before.0.iter().zip(&after.0) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
