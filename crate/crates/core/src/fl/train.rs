use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::weights::l2_norm;
use super::{FlError, LabeledDataset, ModelSpec, Result, WeightVector};

/// Client-side training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
    #[serde(default)]
    pub dp_enabled: bool,
    #[serde(default = "default_max_grad_norm")]
    pub dp_max_grad_norm: f64,
    #[serde(default = "default_noise_multiplier")]
    pub dp_noise_multiplier: f64,
}

fn default_max_grad_norm() -> f64 {
    1.2
}

fn default_noise_multiplier() -> f64 {
    0.4
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            batch_size: 10,
            local_epochs: 1,
            dp_enabled: false,
            dp_max_grad_norm: default_max_grad_norm(),
            dp_noise_multiplier: default_noise_multiplier(),
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FlError::InvalidHyperparams(msg));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate {} must be finite and >= 0",
                self.learning_rate
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.local_epochs == 0 {
            return bad("local_epochs must be positive".into());
        }
        if !(self.dp_max_grad_norm > 0.0 && self.dp_max_grad_norm.is_finite()) {
            return bad(format!(
                "dp_max_grad_norm {} must be > 0",
                self.dp_max_grad_norm
            ));
        }
        if !(self.dp_noise_multiplier >= 0.0 && self.dp_noise_multiplier.is_finite()) {
            return bad(format!(
                "dp_noise_multiplier {} must be >= 0",
                self.dp_noise_multiplier
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdateResult {
    pub new_weights: WeightVector,
    pub sample_count: u64,
    /// Mean per-example loss over the final local epoch, measured before
    /// each minibatch step.
    pub train_loss: f64,
}

/// Runs `local_epochs` epochs of minibatch SGD from `start` on `data`.
///
/// With DP enabled every per-example gradient is clipped to
/// `dp_max_grad_norm` and Gaussian noise is added to each batch mean (see
/// [`dp_clip_and_noise`]). The result is a pure function of the arguments.
pub fn local_train(
    model: &ModelSpec,
    start: &WeightVector,
    data: &LabeledDataset,
    hp: &Hyperparams,
    rng_seed: u64,
) -> Result<LocalUpdateResult> {
    hp.validate()?;
    start.check_dim(model.param_count())?;
    if data.feature_dim() != model.feature_dim() {
        return Err(FlError::DimensionMismatch {
            expected: model.feature_dim(),
            actual: data.feature_dim(),
        });
    }
    if hp.batch_size > data.len() {
        return Err(FlError::InvalidHyperparams(format!(
            "batch_size {} exceeds dataset size {}",
            hp.batch_size,
            data.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut w = start.as_slice().to_vec();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_loss = 0.0;

    for epoch in 0..hp.local_epochs {
        order.shuffle(&mut rng);
        epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(hp.batch_size).enumerate() {
            let mut per_sample = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let (loss, grad) = model.loss_and_grad(&w, &data.examples()[i]);
                epoch_loss += loss;
                per_sample.push(grad);
            }
            let step = if hp.dp_enabled {
                clip_and_noise(
                    &per_sample,
                    hp.dp_max_grad_norm,
                    hp.dp_noise_multiplier,
                    rng.random(),
                )
            } else {
                mean(&per_sample)
            };
            if step.iter().any(|g| !g.is_finite()) {
                return Err(FlError::NonFiniteGradient { epoch, batch });
            }
            for (wi, gi) in w.iter_mut().zip(&step) {
                *wi -= hp.learning_rate * gi;
            }
        }
    }

    let new_weights = WeightVector::new(w).map_err(|_| FlError::NonFiniteGradient {
        epoch: hp.local_epochs - 1,
        batch: 0,
    })?;
    Ok(LocalUpdateResult {
        new_weights,
        sample_count: data.len() as u64,
        train_loss: epoch_loss / data.len() as f64,
    })
}

/// Clips every gradient to L2 norm `max_norm`, averages them and adds
/// per-coordinate Gaussian noise with standard deviation
/// `noise_mult * max_norm / count`.
pub fn dp_clip_and_noise(
    per_sample_grads: &[WeightVector],
    max_norm: f64,
    noise_mult: f64,
    rng_seed: u64,
) -> Result<WeightVector> {
    let first = per_sample_grads
        .first()
        .ok_or(FlError::Empty("gradient list"))?;
    for g in per_sample_grads {
        g.check_dim(first.dim())?;
    }
    if max_norm.is_nan() || max_norm <= 0.0 {
        return Err(FlError::InvalidHyperparams(format!(
            "max_norm {max_norm} must be > 0"
        )));
    }
    if noise_mult.is_nan() || noise_mult < 0.0 {
        return Err(FlError::InvalidHyperparams(format!(
            "noise_mult {noise_mult} must be >= 0"
        )));
    }
    let raw: Vec<Vec<f64>> = per_sample_grads
        .iter()
        .map(|g| g.as_slice().to_vec())
        .collect();
    WeightVector::new(clip_and_noise(&raw, max_norm, noise_mult, rng_seed))
}

/// Scales `grad` by `min(1, max_norm / |grad|)`. The returned vector's
/// computed norm never exceeds `max_norm`, even after rounding.
pub fn clip_to_norm(grad: &[f64], max_norm: f64) -> Vec<f64> {
    let norm = l2_norm(grad);
    if norm <= max_norm {
        return grad.to_vec();
    }
    let mut factor = max_norm / norm;
    loop {
        let clipped: Vec<f64> = grad.iter().map(|g| g * factor).collect();
        if l2_norm(&clipped) <= max_norm {
            return clipped;
        }
        factor = factor.next_down();
    }
}

fn clip_and_noise(grads: &[Vec<f64>], max_norm: f64, noise_mult: f64, seed: u64) -> Vec<f64> {
    let count = grads.len() as f64;
    let dim = grads[0].len();
    let mut sum = vec![0.0; dim];
    for g in grads {
        for (s, c) in sum.iter_mut().zip(clip_to_norm(g, max_norm)) {
            *s += c;
        }
    }
    let std = noise_mult * max_norm / count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (std > 0.0).then(|| Normal::new(0.0, std).expect("std is finite and positive"));
    sum.into_iter()
        .map(|s| {
            let mean = s / count;
            match &noise {
                Some(n) => mean + n.sample(&mut rng),
                None => mean,
            }
        })
        .collect()
}

fn mean(grads: &[Vec<f64>]) -> Vec<f64> {
    let count = grads.len() as f64;
    let mut sum = vec![0.0; grads[0].len()];
    for g in grads {
        for (s, v) in sum.iter_mut().zip(g) {
            *s += v;
        }
    }
    sum.into_iter().map(|s| s / count).collect()
}

/// Mean per-example loss and argmax accuracy of `w` on `data`.
pub fn evaluate(model: &ModelSpec, w: &WeightVector, data: &LabeledDataset) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(FlError::Empty("evaluation dataset"));
    }
    w.check_dim(model.param_count())?;
    if data.feature_dim() != model.feature_dim() {
        return Err(FlError::DimensionMismatch {
            expected: model.feature_dim(),
            actual: data.feature_dim(),
        });
    }
    let (mut loss, mut correct) = (0.0, 0usize);
    for ex in data.examples() {
        loss += model.loss(w.as_slice(), ex);
        if model.predict(w.as_slice(), &ex.features) == ex.label {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}
