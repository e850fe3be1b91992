use super::{DefenseError, Result};
use crate::fl::WeightVector;

#[derive(Debug, Clone, PartialEq)]
pub struct FoolsGoldWeights {
    /// Per-client learning weight in `[0, 1]`.
    pub weights: Vec<f64>,
    /// Clients whose (selected) accumulated history has zero norm. They get
    /// weight 0 and are excluded from the similarity computation.
    pub zero_norm: Vec<usize>,
}

/// FoolsGold client weights from accumulated per-client update histories.
///
/// Pairwise cosine similarities are computed over the coordinates in
/// `features` (all coordinates when `None`). Each client's raw weight is
/// `1 - max similarity`, after pardoning: a client's similarity to a client
/// with a larger maximum similarity is scaled down by the ratio of the two
/// maxima. Weights are then normalised by their maximum and sharpened with a
/// logit (`ln(w / (1 - w)) + 0.5`), clamped to `[0, 1]`.
pub fn fools_gold_weights(
    history: &[WeightVector],
    features: Option<&[usize]>,
) -> Result<FoolsGoldWeights> {
    let n = history.len();
    if n < 2 {
        return Err(DefenseError::TooFewClients(n));
    }
    let dim = history[0].dim();
    for h in history {
        h.check_dim(dim)?;
    }
    let project = |h: &WeightVector| -> Vec<f64> {
        match features {
            Some(idx) => idx.iter().map(|&i| h.as_slice()[i]).collect(),
            None => h.as_slice().to_vec(),
        }
    };
    let vectors: Vec<Vec<f64>> = history.iter().map(project).collect();
    let norms: Vec<f64> = vectors
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let zero_norm: Vec<usize> = (0..n).filter(|&i| norms[i] == 0.0).collect();
    let live: Vec<usize> = (0..n).filter(|&i| norms[i] > 0.0).collect();

    let mut weights = vec![0.0; n];
    if live.len() == 1 {
        weights[live[0]] = 1.0;
    }
    if live.len() >= 2 {
        let k = live.len();
        let mut cs = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in a + 1..k {
                let (i, j) = (live[a], live[b]);
                let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(x, y)| x * y).sum();
                let c = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
                cs[a][b] = c;
                cs[b][a] = c;
            }
        }
        let max_cs: Vec<f64> = (0..k)
            .map(|a| {
                (0..k)
                    .filter(|&b| b != a)
                    .map(|b| cs[a][b])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        for a in 0..k {
            for b in 0..k {
                if a != b && max_cs[a] < max_cs[b] && max_cs[b] > 0.0 {
                    cs[a][b] *= max_cs[a] / max_cs[b];
                }
            }
        }
        let raw: Vec<f64> = (0..k)
            .map(|a| {
                let m = (0..k)
                    .filter(|&b| b != a)
                    .map(|b| cs[a][b])
                    .fold(f64::NEG_INFINITY, f64::max);
                (1.0 - m).clamp(0.0, 1.0)
            })
            .collect();
        let top = raw.iter().copied().fold(0.0, f64::max);
        for (a, &r) in raw.iter().enumerate() {
            weights[live[a]] = if top > 0.0 { sharpen(r / top) } else { 0.0 };
        }
    }
    Ok(FoolsGoldWeights { weights, zero_norm })
}

fn sharpen(w: f64) -> f64 {
    let w = w.min(0.99);
    if w <= 0.0 {
        return 0.0;
    }
    ((w / (1.0 - w)).ln() + 0.5).clamp(0.0, 1.0)
}
