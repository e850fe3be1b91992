use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FlError, Result};

const DIGITS_CSV: &str = include_str!("../../data/digits8x8.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Non-empty set of labelled examples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    examples: Vec<Example>,
    class_count: usize,
    feature_dim: usize,
}

impl LabeledDataset {
    pub fn new(examples: Vec<Example>, class_count: usize) -> Result<Self> {
        let first = examples.first().ok_or(FlError::Empty("dataset"))?;
        if class_count == 0 {
            return Err(FlError::InvalidDataset(
                "class_count must be positive".into(),
            ));
        }
        let feature_dim = first.features.len();
        for (i, ex) in examples.iter().enumerate() {
            if ex.features.len() != feature_dim {
                return Err(FlError::InvalidDataset(format!(
                    "example {i} has {} features, expected {feature_dim}",
                    ex.features.len()
                )));
            }
            if ex.label >= class_count {
                return Err(FlError::InvalidDataset(format!(
                    "example {i} has label {} >= class_count {class_count}",
                    ex.label
                )));
            }
            if let Some(j) = ex.features.iter().position(|v| !v.is_finite()) {
                return Err(FlError::InvalidDataset(format!(
                    "example {i} feature {j} is not finite"
                )));
            }
        }
        Ok(Self {
            examples,
            class_count,
            feature_dim,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for ex in &self.examples {
            counts[ex.label] += 1;
        }
        counts
    }

    /// Builds a dataset from a subset of `self`'s examples, by index.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let examples = indices.iter().map(|&i| self.examples[i].clone()).collect();
        Self::new(examples, self.class_count)
    }

    /// Shuffles and splits into (train, test) with `test_fraction` of the
    /// examples (at least one) held out.
    pub fn train_test_split(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(0.0..1.0).contains(&test_fraction) || self.len() < 2 {
            return Err(FlError::InvalidDataset(format!(
                "cannot hold out {test_fraction} of {} examples",
                self.len()
            )));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let test_len =
            ((self.len() as f64 * test_fraction).round() as usize).clamp(1, self.len() - 1);
        let (test, train) = order.split_at(test_len);
        Ok((self.subset(train)?, self.subset(test)?))
    }

    /// Reverses the label (`c -> class_count - 1 - c`) of a seeded random
    /// `fraction` of the examples. For two classes this is the classic
    /// 0 <-> 1 flip.
    pub fn with_flipped_labels(&self, fraction: f64, seed: u64) -> Self {
        let fraction = fraction.clamp(0.0, 1.0);
        let flip_count = (self.len() as f64 * fraction).round() as usize;
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut examples = self.examples.clone();
        for &i in &order[..flip_count] {
            examples[i].label = self.class_count - 1 - examples[i].label;
        }
        Self {
            examples,
            class_count: self.class_count,
            feature_dim: self.feature_dim,
        }
    }

    /// Loads a CSV file: header row, feature columns, then an integer label
    /// column. `class_count` is one more than the largest label seen.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let reader = csv::Reader::from_path(path)
            .map_err(|e| FlError::InvalidDataset(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(reader)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        Self::from_csv_reader(csv::Reader::from_reader(text.as_bytes()))
    }

    fn from_csv_reader<R: std::io::Read>(mut reader: csv::Reader<R>) -> Result<Self> {
        let columns = reader
            .headers()
            .map_err(|e| FlError::InvalidDataset(format!("header: {e}")))?
            .len();
        if columns < 2 {
            return Err(FlError::InvalidDataset(
                "need at least one feature column and a label column".into(),
            ));
        }
        let mut examples = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| FlError::InvalidDataset(format!("row {row}: {e}")))?;
            let parse_err = |col: usize| {
                FlError::InvalidDataset(format!("row {row} column {col}: not a number"))
            };
            let mut features = Vec::with_capacity(columns - 1);
            for col in 0..columns - 1 {
                let v: f64 = record[col].trim().parse().map_err(|_| parse_err(col))?;
                features.push(v);
            }
            let label: usize = record[columns - 1]
                .trim()
                .parse()
                .map_err(|_| parse_err(columns - 1))?;
            examples.push(Example { features, label });
        }
        let class_count = examples.iter().map(|e| e.label + 1).max().unwrap_or(0);
        Self::new(examples, class_count)
    }

    /// The bundled 8x8 handwritten digit set: 1797 examples, 64 pixel
    /// intensities in 0..=16, ten classes.
    pub fn digits() -> Self {
        Self::from_csv_str(DIGITS_CSV).expect("bundled digits dataset is well-formed")
    }
}

/// Synthetic Gaussian-mixture classification task.
///
/// Class 0 is centred at `-separation * e0`; class `c >= 1` at
/// `separation * e_{(c-1) mod dim}`. With probability `tail_fraction` an
/// example of class `c >= 1` is instead drawn from a far sub-cluster at
/// `tail_offset` along the same axis. All components have unit isotropic
/// covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTask {
    pub dim: usize,
    pub class_count: usize,
    pub samples: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default)]
    pub tail_fraction: f64,
    #[serde(default)]
    pub tail_offset: f64,
}

fn default_separation() -> f64 {
    2.0
}

impl SyntheticTask {
    /// Plain Gaussian mixture with the default separation and no tail.
    pub fn new(dim: usize, class_count: usize, samples: usize) -> Self {
        Self {
            dim,
            class_count,
            samples,
            separation: default_separation(),
            tail_fraction: 0.0,
            tail_offset: 0.0,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<LabeledDataset> {
        if self.dim == 0 || self.class_count < 2 || self.samples == 0 {
            return Err(FlError::InvalidDataset(format!(
                "synthetic task needs dim >= 1, class_count >= 2, samples >= 1; got {self:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let examples = (0..self.samples)
            .map(|_| {
                let label = rng.random_range(0..self.class_count);
                let mut features: Vec<f64> =
                    (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
                if label == 0 {
                    features[0] -= self.separation;
                } else {
                    let axis = (label - 1) % self.dim;
                    let tail = rng.random::<f64>() < self.tail_fraction;
                    features[axis] += if tail {
                        self.tail_offset
                    } else {
                        self.separation
                    };
                }
                Example { features, label }
            })
            .collect();
        LabeledDataset::new(examples, self.class_count)
    }
}
