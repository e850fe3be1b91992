use super::{DefenseError, Result};
use crate::fl::WeightVector;

/// Krum score of every update: the sum of squared Euclidean distances to its
/// `n - f - 2` nearest other updates.
pub fn krum_scores(updates: &[WeightVector], f: usize) -> Result<Vec<f64>> {
    let n = updates.len();
    if n < f + 3 {
        return Err(DefenseError::KrumParams { n, f, m: 0 });
    }
    let dim = updates[0].dim();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        updates[i].check_dim(dim)?;
        for j in i + 1..n {
            let d = updates[i].distance_squared(&updates[j])?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let neighbours = n - f - 2;
    Ok((0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i][j]).collect();
            row.sort_by(f64::total_cmp);
            row[..neighbours].iter().sum()
        })
        .collect())
}

/// Multi-Krum selection: the `m` indices with the lowest Krum scores, ordered
/// by (score, index). Ties go to the lower index.
pub fn multi_krum_select(updates: &[WeightVector], f: usize, m: usize) -> Result<Vec<usize>> {
    let n = updates.len();
    if n < f + 3 || m == 0 || m > n - f {
        return Err(DefenseError::KrumParams { n, f, m });
    }
    let scores = krum_scores(updates, f)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order.truncate(m);
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(values: &[f64]) -> Vec<WeightVector> {
        values
            .iter()
            .map(|&v| WeightVector::new(vec![v]).unwrap())
            .collect()
    }

    #[test]
    fn excludes_outlier() {
        let updates = scalars(&[0.0, 0.1, 0.2, 0.1, 10.0]);
        let selected = multi_krum_select(&updates, 1, 3).unwrap();
        assert_eq!(selected, vec![1, 3, 0]);
        let scores = krum_scores(&updates, 1).unwrap();
        assert!((scores[1] - 0.01).abs() < 1e-12);
        assert!((scores[0] - 0.02).abs() < 1e-12);
    }

    #[test]
    fn identical_updates_tie_break_by_index() {
        let updates = scalars(&[1.0; 6]);
        assert_eq!(multi_krum_select(&updates, 1, 3).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn parameter_validation() {
        let updates = scalars(&[0.0, 1.0, 2.0, 3.0]);
        assert!(multi_krum_select(&updates, 2, 1).is_err());
        assert!(multi_krum_select(&updates, 1, 0).is_err());
        assert!(multi_krum_select(&updates, 1, 4).is_err());
        assert_eq!(multi_krum_select(&updates, 1, 3).unwrap().len(), 3);
    }
}
