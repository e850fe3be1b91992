use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Example, WeightVector};

/// Desk-scale model architectures. Parameters live in one flat vector whose
/// layout is fixed per variant:
///
/// * `LogisticRegression`: `classes x features` weights (row-major), then
///   `classes` biases. Softmax cross-entropy loss.
/// * `Mlp`: `hidden x features` weights, `hidden` biases, `classes x hidden`
///   weights, `classes` biases. Tanh hidden layer, softmax cross-entropy.
/// * `LeastSquares`: `features` weights, no bias. Loss `(w.x - label)^2`;
///   the predicted class is `w.x` rounded and clamped into range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    LogisticRegression {
        features: usize,
        classes: usize,
    },
    Mlp {
        features: usize,
        hidden: usize,
        classes: usize,
    },
    LeastSquares {
        features: usize,
        classes: usize,
    },
}

impl ModelSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            ModelSpec::LogisticRegression { features, classes } => classes * features + classes,
            ModelSpec::Mlp {
                features,
                hidden,
                classes,
            } => hidden * features + hidden + classes * hidden + classes,
            ModelSpec::LeastSquares { features, .. } => features,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match *self {
            ModelSpec::LogisticRegression { features, .. }
            | ModelSpec::Mlp { features, .. }
            | ModelSpec::LeastSquares { features, .. } => features,
        }
    }

    pub fn class_count(&self) -> usize {
        match *self {
            ModelSpec::LogisticRegression { classes, .. }
            | ModelSpec::Mlp { classes, .. }
            | ModelSpec::LeastSquares { classes, .. } => classes,
        }
    }

    /// Initial global weights. Linear models start at zero; the MLP uses a
    /// seeded Xavier-uniform draw so hidden units are not symmetric.
    pub fn init_weights(&self, seed: u64) -> WeightVector {
        match *self {
            ModelSpec::Mlp {
                features,
                hidden,
                classes,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut values = Vec::with_capacity(self.param_count());
                let a1 = (6.0 / (features + hidden) as f64).sqrt();
                values.extend((0..hidden * features).map(|_| rng.random_range(-a1..a1)));
                values.extend(std::iter::repeat_n(0.0, hidden));
                let a2 = (6.0 / (hidden + classes) as f64).sqrt();
                values.extend((0..classes * hidden).map(|_| rng.random_range(-a2..a2)));
                values.extend(std::iter::repeat_n(0.0, classes));
                WeightVector::new(values).expect("finite init")
            }
            _ => WeightVector::zeros(self.param_count()),
        }
    }

    /// Per-example loss.
    pub fn loss(&self, w: &[f64], ex: &Example) -> f64 {
        match *self {
            ModelSpec::LeastSquares { .. } => {
                let r = dot(w, &ex.features) - ex.label as f64;
                r * r
            }
            _ => {
                let logits = self.logits(w, &ex.features);
                cross_entropy(&logits, ex.label)
            }
        }
    }

    /// Per-example loss and its gradient with respect to `w`.
    pub fn loss_and_grad(&self, w: &[f64], ex: &Example) -> (f64, Vec<f64>) {
        let x = &ex.features;
        match *self {
            ModelSpec::LeastSquares { .. } => {
                let r = dot(w, x) - ex.label as f64;
                (r * r, x.iter().map(|xi| 2.0 * r * xi).collect())
            }
            ModelSpec::LogisticRegression { features, classes } => {
                let logits = linear(w, x, classes, features);
                let (loss, dlogits) = softmax_xent_grad(&logits, ex.label);
                let mut grad = vec![0.0; self.param_count()];
                let (gw, gb) = grad.split_at_mut(classes * features);
                for (c, d) in dlogits.iter().enumerate() {
                    for (g, xi) in gw[c * features..(c + 1) * features].iter_mut().zip(x) {
                        *g = d * xi;
                    }
                    gb[c] = *d;
                }
                (loss, grad)
            }
            ModelSpec::Mlp {
                features,
                hidden,
                classes,
            } => {
                let (w1, rest) = w.split_at(hidden * features);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(classes * hidden);
                let h: Vec<f64> = (0..hidden)
                    .map(|j| (dot(&w1[j * features..(j + 1) * features], x) + b1[j]).tanh())
                    .collect();
                let logits: Vec<f64> = (0..classes)
                    .map(|c| dot(&w2[c * hidden..(c + 1) * hidden], &h) + b2[c])
                    .collect();
                let (loss, dlogits) = softmax_xent_grad(&logits, ex.label);

                let mut grad = vec![0.0; self.param_count()];
                let (gw1, rest) = grad.split_at_mut(hidden * features);
                let (gb1, rest) = rest.split_at_mut(hidden);
                let (gw2, gb2) = rest.split_at_mut(classes * hidden);
                let mut dh = vec![0.0; hidden];
                for c in 0..classes {
                    gb2[c] = dlogits[c];
                    for j in 0..hidden {
                        gw2[c * hidden + j] = dlogits[c] * h[j];
                        dh[j] += dlogits[c] * w2[c * hidden + j];
                    }
                }
                for j in 0..hidden {
                    let dz = dh[j] * (1.0 - h[j] * h[j]);
                    gb1[j] = dz;
                    for (g, xi) in gw1[j * features..(j + 1) * features].iter_mut().zip(x) {
                        *g = dz * xi;
                    }
                }
                (loss, grad)
            }
        }
    }

    pub fn predict(&self, w: &[f64], features: &[f64]) -> usize {
        match *self {
            ModelSpec::LeastSquares { classes, .. } => {
                let y = dot(w, features).round();
                y.clamp(0.0, (classes - 1) as f64) as usize
            }
            _ => argmax(&self.logits(w, features)),
        }
    }

    fn logits(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        match *self {
            ModelSpec::LogisticRegression { features, classes } => linear(w, x, classes, features),
            ModelSpec::Mlp {
                features,
                hidden,
                classes,
            } => {
                let (w1, rest) = w.split_at(hidden * features);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(classes * hidden);
                let h: Vec<f64> = (0..hidden)
                    .map(|j| (dot(&w1[j * features..(j + 1) * features], x) + b1[j]).tanh())
                    .collect();
                (0..classes)
                    .map(|c| dot(&w2[c * hidden..(c + 1) * hidden], &h) + b2[c])
                    .collect()
            }
            ModelSpec::LeastSquares { .. } => vec![dot(w, x)],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn linear(w: &[f64], x: &[f64], classes: usize, features: usize) -> Vec<f64> {
    let (weights, bias) = w.split_at(classes * features);
    (0..classes)
        .map(|c| dot(&weights[c * features..(c + 1) * features], x) + bias[c])
        .collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    log_sum_exp(logits) - logits[label]
}

/// Loss and d(loss)/d(logits) = softmax - onehot.
fn softmax_xent_grad(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let lse = log_sum_exp(logits);
    let mut d: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
    d[label] -= 1.0;
    (lse - logits[label], d)
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
