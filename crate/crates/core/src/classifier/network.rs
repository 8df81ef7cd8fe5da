use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class membership scores in `[0, 1]` that sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MembershipVector(pub Vec<f64>);

impl MembershipVector {
    /// Index of the largest membership; ties go to the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Element-wise mean of several membership vectors.
    pub fn mean(vectors: &[MembershipVector]) -> Result<MembershipVector> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::invalid("cannot average zero membership vectors"))?;
        let mut acc = vec![0.0; first.0.len()];
        for v in vectors {
            if v.0.len() != acc.len() {
                return Err(Error::shape(acc.len(), v.0.len()));
            }
            acc.iter_mut().zip(&v.0).for_each(|(a, b)| *a += b);
        }
        let n = vectors.len() as f64;
        Ok(MembershipVector(acc.into_iter().map(|a| a / n).collect()))
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// A differentiable classifier whose parameters live in one flat vector.
pub trait Network {
    fn input_len(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    /// Output-layer pre-activations for one input.
    fn logits(&self, input: &[f64]) -> Result<Vec<f64>>;

    /// Adds `scale * dL/dθ` for the cross-entropy of one example to `grad` and
    /// returns that example's loss.
    fn accumulate_gradient(&self, input: &[f64], label: usize, scale: f64, grad: &mut [f64]) -> Result<f64>;

    fn predict_memberships(&self, input: &[f64]) -> Result<MembershipVector> {
        Ok(MembershipVector(softmax(&self.logits(input)?)))
    }

    fn predict(&self, input: &[f64]) -> Result<usize> {
        Ok(self.predict_memberships(input)?.argmax())
    }
}

pub(crate) fn check_input(expected: usize, input: &[f64]) -> Result<()> {
    if input.len() != expected {
        return Err(Error::shape(format!("input of length {expected}"), input.len()));
    }
    Ok(())
}

pub(crate) fn check_label(label: usize, n_classes: usize) -> Result<()> {
    if label >= n_classes {
        return Err(Error::invalid(format!(
            "label {label} out of range for {n_classes} classes"
        )));
    }
    Ok(())
}

/// Cross-entropy of `softmax(logits)` against `label`, and `softmax - onehot`.
pub(crate) fn cross_entropy_delta(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    let loss = log_total - logits[label];
    let mut delta: Vec<f64> = logits.iter().map(|z| (z - log_total).exp()).collect();
    delta[label] -= 1.0;
    (loss, delta)
}

/// Mean cross-entropy over the batch plus `l2/2 * ||θ||²`.
pub fn batch_loss<N: Network + ?Sized>(net: &N, inputs: &[Vec<f64>], labels: &[usize], l2: f64) -> Result<f64> {
    check_batch(inputs, labels)?;
    let mut total = 0.0;
    for (x, &y) in inputs.iter().zip(labels) {
        check_label(y, net.n_classes())?;
        let (loss, _) = cross_entropy_delta(&net.logits(x)?, y);
        total += loss;
    }
    Ok(total / inputs.len() as f64 + l2_penalty(net.params(), l2))
}

/// Gradient of [`batch_loss`] with respect to every parameter.
pub fn batch_gradient<N: Network + ?Sized>(
    net: &N,
    inputs: &[Vec<f64>],
    labels: &[usize],
    l2: f64,
) -> Result<(f64, Vec<f64>)> {
    check_batch(inputs, labels)?;
    let mut grad = vec![0.0; net.params().len()];
    let scale = 1.0 / inputs.len() as f64;
    let mut total = 0.0;
    for (x, &y) in inputs.iter().zip(labels) {
        total += net.accumulate_gradient(x, y, scale, &mut grad)?;
    }
    if l2 != 0.0 {
        grad.iter_mut().zip(net.params()).for_each(|(g, p)| *g += l2 * p);
    }
    Ok((total * scale + l2_penalty(net.params(), l2), grad))
}

fn l2_penalty(params: &[f64], l2: f64) -> f64 {
    if l2 == 0.0 {
        0.0
    } else {
        0.5 * l2 * params.iter().map(|p| p * p).sum::<f64>()
    }
}

fn check_batch(inputs: &[Vec<f64>], labels: &[usize]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if inputs.len() != labels.len() {
        return Err(Error::shape(format!("{} labels", inputs.len()), labels.len()));
    }
    Ok(())
}
