use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::{FlError, LabeledDataset, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartitionMode {
    /// Shuffled split into near-equal parts (sizes differ by at most one).
    Iid,
    /// Each client draws a label distribution from a symmetric
    /// Dirichlet(`alpha`) and fills its quota by sampling labels from it.
    LabelSkew {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

fn default_alpha() -> f64 {
    0.5
}

/// Splits `data` into `k` disjoint, non-empty parts covering every example.
pub fn partition_dataset(
    data: &LabeledDataset,
    k: usize,
    mode: PartitionMode,
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    if k == 0 || k > data.len() {
        return Err(FlError::TooManyPartitions {
            size: data.len(),
            parts: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quotas = quotas(data.len(), k);
    let groups = match mode {
        PartitionMode::Iid => {
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut rng);
            let mut rest = order.as_slice();
            quotas
                .iter()
                .map(|&q| {
                    let (head, tail) = rest.split_at(q);
                    rest = tail;
                    head.to_vec()
                })
                .collect::<Vec<_>>()
        }
        PartitionMode::LabelSkew { alpha } => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(FlError::InvalidDataset(format!(
                    "dirichlet alpha {alpha} must be > 0"
                )));
            }
            label_skew(data, &quotas, alpha, &mut rng)
        }
    };
    groups.iter().map(|g| data.subset(g)).collect()
}

fn quotas(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

fn label_skew(
    data: &LabeledDataset,
    quotas: &[usize],
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let classes = data.class_count();
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, ex) in data.examples().iter().enumerate() {
        pools[ex.label].push(i);
    }
    for pool in &mut pools {
        pool.shuffle(rng);
    }
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated");

    quotas
        .iter()
        .map(|&quota| {
            let mut probs: Vec<f64> = (0..classes).map(|_| gamma.sample(rng)).collect();
            let mut part = Vec::with_capacity(quota);
            for _ in 0..quota {
                let label = draw_available(&mut probs, &pools, rng);
                part.push(pools[label].pop().expect("drawn label has examples"));
            }
            part
        })
        .collect()
}

/// Samples a label proportional to `probs` among labels with examples left.
/// Falls back to uniform over available labels when all their mass is zero.
fn draw_available(probs: &mut [f64], pools: &[Vec<usize>], rng: &mut ChaCha8Rng) -> usize {
    let available: Vec<usize> = (0..pools.len()).filter(|&c| !pools[c].is_empty()).collect();
    let mass: f64 = available.iter().map(|&c| probs[c]).sum();
    if mass > 0.0 && mass.is_finite() {
        let mut target = rng.random::<f64>() * mass;
        for &c in &available {
            target -= probs[c];
            if target < 0.0 && probs[c] > 0.0 {
                return c;
            }
        }
        // Rounding left a sliver of mass; take the last positive entry.
        *available
            .iter()
            .rev()
            .find(|&&c| probs[c] > 0.0)
            .expect("positive mass")
    } else {
        available[rng.random_range(0..available.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::SyntheticTask;

    fn data(samples: usize, classes: usize) -> LabeledDataset {
        SyntheticTask {
            dim: 2,
            class_count: classes,
            samples,
            separation: 2.0,
            tail_fraction: 0.0,
            tail_offset: 0.0,
        }
        .generate(42)
        .unwrap()
    }

    fn assert_partition_law(ds: &LabeledDataset, parts: &[LabeledDataset]) {
        let mut all: Vec<String> = parts
            .iter()
            .flat_map(|p| p.examples().iter().map(|e| format!("{:?}", e)))
            .collect();
        let mut expected: Vec<String> = ds.examples().iter().map(|e| format!("{:?}", e)).collect();
        all.sort();
        expected.sort();
        assert_eq!(all, expected);
    }

    #[test]
    fn single_partition_is_whole_dataset() {
        let ds = data(30, 3);
        let parts = partition_dataset(&ds, 1, PartitionMode::Iid, 1).unwrap();
        assert_eq!(parts.len(), 1);
        assert_partition_law(&ds, &parts);
    }

    #[test]
    fn iid_split_sizes() {
        let ds = data(100, 3);
        let parts = partition_dataset(&ds, 4, PartitionMode::Iid, 1).unwrap();
        assert!(parts.iter().all(|p| p.len() == 25));
        assert_partition_law(&ds, &parts);
    }

    #[test]
    fn label_skew_covers_and_is_seeded() {
        let ds = data(103, 4);
        let mode = PartitionMode::LabelSkew { alpha: 0.3 };
        let parts = partition_dataset(&ds, 5, mode, 8).unwrap();
        assert_partition_law(&ds, &parts);
        assert_eq!(parts, partition_dataset(&ds, 5, mode, 8).unwrap());
        assert!(parts.iter().all(|p| !p.is_empty()));
    }

    #[test]
    fn too_many_parts() {
        let ds = data(3, 2);
        assert!(matches!(
            partition_dataset(&ds, 4, PartitionMode::Iid, 0),
            Err(FlError::TooManyPartitions { .. })
        ));
        assert!(partition_dataset(&ds, 0, PartitionMode::Iid, 0).is_err());
    }

    #[test]
    fn strong_skew_concentrates_labels() {
        // Monte Carlo: with alpha = 0.1 the expected majority fraction per
        // client is well above 0.75.
        let ds = data(200, 2);
        let mut fractions = Vec::new();
        for seed in 0..100 {
            let parts =
                partition_dataset(&ds, 2, PartitionMode::LabelSkew { alpha: 0.1 }, seed).unwrap();
            for p in parts {
                let counts = p.label_counts();
                fractions.push(*counts.iter().max().unwrap() as f64 / p.len() as f64);
            }
        }
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        assert!(mean > 0.75, "mean majority fraction {mean}");
    }
}
