use crate::error::{Error, Result};

/// Floor on per-class variance so the score stays finite for separable data.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Fisher score per feature:
/// `F_j = Σ_c n_c (μ_cj − μ_j)² / Σ_c n_c σ²_cj`, population variances.
pub fn fisher_score(rows: &[Vec<f64>], labels: &[usize]) -> Result<Vec<f64>> {
    if rows.len() != labels.len() {
        return Err(Error::shape(format!("{} labels", rows.len()), labels.len()));
    }
    let Some(dim) = rows.first().map(Vec::len) else {
        return Err(Error::invalid("fisher score needs data"));
    };
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid("rows have inconsistent lengths"));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    members.retain(|m| !m.is_empty());
    if members.len() < 2 {
        return Err(Error::invalid("fisher score needs at least 2 classes"));
    }
    if let Some(small) = members.iter().find(|m| m.len() < 2) {
        return Err(Error::invalid(format!(
            "every class needs at least 2 rows (found one with {})",
            small.len()
        )));
    }

    let n = rows.len() as f64;
    Ok((0..dim)
        .map(|j| {
            let overall = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let (mut between, mut within) = (0.0, 0.0);
            for m in &members {
                let nc = m.len() as f64;
                let mu = m.iter().map(|&i| rows[i][j]).sum::<f64>() / nc;
                let var = m.iter().map(|&i| (rows[i][j] - mu).powi(2)).sum::<f64>() / nc;
                between += nc * (mu - overall).powi(2);
                within += nc * var.max(VARIANCE_FLOOR);
            }
            between / within
        })
        .collect())
}

/// Indices (0-based, ascending) of the `k` highest scores; ties go to the lower index.
pub fn select_top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", scores.len())));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut top = order[..k].to_vec();
    top.sort_unstable();
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn two_class_data(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let rows = labels
            .iter()
            .map(|&l| {
                vec![
                    l as f64 + rng.random_range(-0.01..0.01),
                    rng.random_range(-1.0..1.0),
                    3.0,
                ]
            })
            .collect();
        (rows, labels)
    }

    #[test]
    fn informative_feature_ranks_first() {
        let (rows, labels) = two_class_data(1);
        let scores = fisher_score(&rows, &labels).unwrap();
        assert!(scores[0] > scores[1]);
        assert_eq!(scores[2], 0.0);
        assert_eq!(select_top_k(&scores, 1).unwrap(), vec![0]);
    }

    #[test]
    fn hand_computed_score() {
        // class 0: {0, 2} mean 1 var 1; class 1: {4, 6} mean 5 var 1; overall 3
        // between = 2*4 + 2*4 = 16, within = 2*1 + 2*1 = 4
        let rows = vec![vec![0.0], vec![2.0], vec![4.0], vec![6.0]];
        let s = fisher_score(&rows, &[0, 0, 1, 1]).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        assert!(fisher_score(&rows, &[0, 0, 0]).is_err());
        assert!(fisher_score(&rows, &[0, 0, 1]).is_err());
        assert!(fisher_score(&rows, &[0, 1]).is_err());
    }

    #[test]
    fn top_k_rules() {
        assert_eq!(select_top_k(&[0.1, 0.9, 0.5], 2).unwrap(), vec![1, 2]);
        assert_eq!(select_top_k(&[0.1, 0.9, 0.5], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(select_top_k(&[0.5, 0.5, 0.5, 0.5], 2).unwrap(), vec![0, 1]);
        assert!(select_top_k(&[0.1], 0).is_err());
        assert!(select_top_k(&[0.1], 2).is_err());
    }

    proptest! {
        #[test]
        fn shift_invariant_and_scale_ranking_stable(shift in -100.0f64..100.0, scale in 0.1f64..10.0, seed in 0u64..50) {
            let (rows, labels) = two_class_data(seed);
            let base = fisher_score(&rows, &labels).unwrap();
            let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
            let s = fisher_score(&shifted, &labels).unwrap();
            for (a, b) in base.iter().zip(&s) {
                prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
            }
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
            let s = fisher_score(&scaled, &labels).unwrap();
            prop_assert_eq!(select_top_k(&base, 2).unwrap(), select_top_k(&s, 2).unwrap());
        }
    }
}
