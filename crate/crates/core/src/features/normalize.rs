use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns whose population std falls below this (relative to their mean
/// magnitude) are treated as constant and passed through unchanged.
const ZERO_VARIANCE_TOL: f64 = 1e-12;

/// Per-feature z-score transform using population statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "normalizer needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let dim = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::shape(dim, bad.len()));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        let mut std = vec![0.0; dim];
        for j in 0..dim {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            if s <= ZERO_VARIANCE_TOL * m.abs().max(1.0) {
                mean[j] = 0.0;
                std[j] = 1.0;
            } else {
                mean[j] = m;
                std[j] = s;
            }
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::shape(self.dim(), row.len()));
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_column_maps_to_unit() {
        let norm = Normalizer::fit(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(norm.apply(&[0.0]).unwrap(), vec![-1.0]);
        assert_eq!(norm.apply(&[2.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn constant_column_passes_through() {
        let rows = vec![vec![5.0, 1.0], vec![5.0, 3.0], vec![5.0, 2.0]];
        let norm = Normalizer::fit(&rows).unwrap();
        assert_eq!(norm.std[0], 1.0);
        for r in &rows {
            assert_eq!(norm.apply(r).unwrap()[0], 5.0);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(Normalizer::fit(&[vec![1.0]]), Err(Error::InsufficientData(_))));
        assert!(Normalizer::fit(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let norm = Normalizer::fit(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(norm.apply(&[1.0, 2.0]), Err(Error::Shape { .. })));
    }

    proptest! {
        #[test]
        fn fitted_rows_are_standardized(
            rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 4), 2..40)
        ) {
            let norm = Normalizer::fit(&rows).unwrap();
            let z = norm.apply_all(&rows).unwrap();
            let n = z.len() as f64;
            for j in 0..4 {
                if norm.std[j] == 1.0 && norm.mean[j] == 0.0 {
                    continue;
                }
                let m = z.iter().map(|r| r[j]).sum::<f64>() / n;
                let s = (z.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!(m.abs() < 1e-9);
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn apply_is_affine(x in proptest::collection::vec(-10.0f64..10.0, 3), a in -5.0f64..5.0) {
            let norm = Normalizer::fit(&[vec![0.0, 1.0, 2.0], vec![4.0, -1.0, 7.0], vec![1.0, 0.5, 0.0]]).unwrap();
            let zero = norm.apply(&[0.0; 3]).unwrap();
            let fx = norm.apply(&x).unwrap();
            let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
            let fax = norm.apply(&ax).unwrap();
            for j in 0..3 {
                prop_assert!(((fax[j] - zero[j]) - a * (fx[j] - zero[j])).abs() < 1e-9);
            }
        }
    }
}
