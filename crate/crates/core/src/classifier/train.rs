use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{batch_gradient, batch_loss, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
            batch_size: 16,
            seed: 0,
            train_fraction: 0.8,
            l2: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::invalid(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if !(0.5..1.0).contains(&self.train_fraction) {
            return Err(Error::invalid(format!(
                "train fraction {} outside [0.5, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Full-batch training loss before training, then after each epoch.
    pub loss_curve: Vec<f64>,
    pub final_learning_rate: f64,
    /// Epochs whose update was rolled back because the loss rose.
    pub rejected_epochs: usize,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.loss_curve[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_curve.last().expect("curve holds the initial loss")
    }
}

/// Mini-batch gradient descent on cross-entropy with L2 decay.
///
/// After every epoch the full training loss is compared with the previous
/// one; if it rose, the epoch is undone and the learning rate halved, so the
/// recorded curve never increases. A non-finite loss is a divergence error.
pub fn train<N: Network + ?Sized>(
    net: &mut N,
    inputs: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut lr = config.learning_rate;
    let mut current = batch_loss(net, inputs, labels, config.l2)?;
    if !current.is_finite() {
        return Err(Error::Divergence { epoch: 0 });
    }
    let mut curve = vec![current];
    let mut rejected = 0;
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut batch_x = Vec::with_capacity(config.batch_size);
    let mut batch_y = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.epochs {
        let snapshot = net.params().to_vec();
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch_x.clear();
            batch_y.clear();
            for &i in chunk {
                batch_x.push(inputs[i].clone());
                batch_y.push(labels[i]);
            }
            let (_, grad) = batch_gradient(net, &batch_x, &batch_y, config.l2)?;
            net.params_mut().iter_mut().zip(&grad).for_each(|(p, g)| *p -= lr * g);
        }
        let loss = batch_loss(net, inputs, labels, config.l2)?;
        if !loss.is_finite() {
            net.params_mut().copy_from_slice(&snapshot);
            return Err(Error::Divergence { epoch });
        }
        if loss > current {
            net.params_mut().copy_from_slice(&snapshot);
            lr *= 0.5;
            rejected += 1;
            log::debug!("epoch {epoch}: loss rose to {loss:.6}, learning rate now {lr}");
        } else {
            current = loss;
        }
        curve.push(current);
        if epoch % 50 == 0 {
            log::debug!("epoch {epoch}: loss {current:.6}");
        }
    }
    Ok(TrainReport {
        loss_curve: curve,
        final_learning_rate: lr,
        rejected_epochs: rejected,
    })
}

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_MIN_PARAMS: usize = 200;
/// Denominator floor for the relative error, so parameters whose gradient is
/// essentially zero are judged on absolute agreement.
const GRADCHECK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub checked_params: usize,
    pub worst_param: usize,
}

/// Compares backpropagated gradients with central differences on at least
/// 200 sampled parameters (all of them when there are fewer).
pub fn gradient_check<N: Network + ?Sized>(
    net: &mut N,
    inputs: &[Vec<f64>],
    labels: &[usize],
    l2: f64,
    seed: u64,
) -> Result<GradientCheck> {
    if inputs.is_empty() {
        return Err(Error::invalid("gradient check needs a non-empty batch"));
    }
    let (_, analytic) = batch_gradient(net, inputs, labels, l2)?;
    let n = net.params().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, n, GRADCHECK_MIN_PARAMS.min(n)).into_vec();
    picks.sort_unstable();

    let mut worst = (0.0f64, 0usize);
    for &i in &picks {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + GRADCHECK_STEP;
        let plus = batch_loss(net, inputs, labels, l2)?;
        net.params_mut()[i] = orig - GRADCHECK_STEP;
        let minus = batch_loss(net, inputs, labels, l2)?;
        net.params_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * GRADCHECK_STEP);
        let a = analytic[i];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(GRADCHECK_FLOOR);
        if rel > worst.0 || worst.0.is_nan() {
            worst = (rel, i);
        }
    }
    Ok(GradientCheck {
        max_relative_error: worst.0,
        checked_params: picks.len(),
        worst_param: worst.1,
    })
}
