use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::error::{Error, Result};

/// Name of the class whose false-positive rate is the false-alarm rate.
pub const HEALTHY_CLASS: &str = "healthy";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub classes: Vec<String>,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub sensitivity: Vec<f64>,
    pub specificity: Vec<f64>,
    /// `1 - specificity` of the healthy class, when there is one.
    pub false_alarm_rate: Option<f64>,
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_confusion(classes: Vec<String>, confusion: Vec<Vec<usize>>) -> Result<Self> {
        let c = classes.len();
        if confusion.len() != c || confusion.iter().any(|r| r.len() != c) {
            return Err(Error::shape(
                format!("{c}x{c} confusion matrix"),
                format!("{} rows", confusion.len()),
            ));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::invalid("empty test set"));
        }
        let correct: usize = (0..c).map(|i| confusion[i][i]).sum();
        let mut sensitivity = Vec::with_capacity(c);
        let mut specificity = Vec::with_capacity(c);
        for k in 0..c {
            let tp = confusion[k][k];
            let row: usize = confusion[k].iter().sum();
            let col: usize = confusion.iter().map(|r| r[k]).sum();
            let (fn_, fp) = (row - tp, col - tp);
            let tn = total - tp - fn_ - fp;
            sensitivity.push(rate(tp, tp + fn_));
            specificity.push(rate(tn, tn + fp));
        }
        let false_alarm_rate = classes
            .iter()
            .position(|n| n == HEALTHY_CLASS)
            .map(|h| 1.0 - specificity[h]);
        Ok(Self {
            classes,
            accuracy: rate(correct, total),
            confusion,
            sensitivity,
            specificity,
            false_alarm_rate,
        })
    }

    pub fn from_predictions(classes: Vec<String>, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::shape(truth.len(), predicted.len()));
        }
        if truth.is_empty() {
            return Err(Error::invalid("empty test set"));
        }
        let c = classes.len();
        let mut confusion = vec![vec![0usize; c]; c];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= c || p >= c {
                return Err(Error::invalid(format!("class index out of range for {c} classes")));
            }
            confusion[t][p] += 1;
        }
        Self::from_confusion(classes, confusion)
    }

    /// Plain-text report: accuracy, per-class rates and the confusion matrix.
    pub fn to_table(&self) -> String {
        let width = self.classes.iter().map(String::len).max().unwrap_or(5).max(5);
        let mut s = format!("accuracy {:.4}", self.accuracy);
        if let Some(f) = self.false_alarm_rate {
            s.push_str(&format!("  false-alarm rate {f:.4}"));
        }
        s.push_str(&format!("\n{:width$}  sensitivity  specificity\n", "class"));
        for (i, name) in self.classes.iter().enumerate() {
            s.push_str(&format!(
                "{name:width$}  {:>11.4}  {:>11.4}\n",
                self.sensitivity[i], self.specificity[i]
            ));
        }
        s.push_str(&format!("confusion (rows = true)\n{:width$}", ""));
        for name in &self.classes {
            s.push_str(&format!(" {name:>width$}"));
        }
        s.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            s.push_str(&format!("{:width$}", self.classes[i]));
            for v in row {
                s.push_str(&format!(" {v:>width$}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Scores `net` on held-out rows.
pub fn evaluate<N: Network + ?Sized>(
    net: &N,
    classes: &[String],
    inputs: &[Vec<f64>],
    labels: &[usize],
) -> Result<Metrics> {
    if inputs.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    if classes.len() != net.n_classes() {
        return Err(Error::shape(format!("{} class names", net.n_classes()), classes.len()));
    }
    let predicted = inputs.iter().map(|x| net.predict(x)).collect::<Result<Vec<_>>>()?;
    Metrics::from_predictions(classes.to_vec(), labels, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        ["covid_like", "flu_like", "healthy"][..n]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn hand_built_two_by_two() {
        let m = Metrics::from_confusion(vec!["sick".into(), "healthy".into()], vec![vec![8, 2], vec![1, 9]]).unwrap();
        assert!((m.sensitivity[0] - 0.8).abs() < 1e-12);
        assert!((m.specificity[0] - 0.9).abs() < 1e-12);
        assert!((m.accuracy - 0.85).abs() < 1e-12);
        // healthy specificity = 8 / (8 + 2)
        assert!((m.false_alarm_rate.unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let truth = [0, 1, 2, 0, 1, 2];
        let m = Metrics::from_predictions(names(3), &truth, &truth).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.confusion, vec![vec![2, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
        let m = Metrics::from_predictions(names(3), &truth, &[1; 6]).unwrap();
        assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_test_set_rejected() {
        assert!(Metrics::from_predictions(names(2), &[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn rates_bounded_and_rows_count(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..60)) {
            let (t, p): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let m = Metrics::from_predictions(names(3), &t, &p).unwrap();
            for k in 0..3 {
                prop_assert_eq!(m.confusion[k].iter().sum::<usize>(), t.iter().filter(|&&v| v == k).count());
                prop_assert!((0.0..=1.0).contains(&m.sensitivity[k]));
                prop_assert!((0.0..=1.0).contains(&m.specificity[k]));
            }
            prop_assert!((0.0..=1.0).contains(&m.accuracy));
        }
    }
}
