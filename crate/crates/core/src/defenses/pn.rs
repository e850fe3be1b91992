use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DefenseError, PolicyVerdict, Result};
use crate::fl::WeightVector;

/// Pseudo-noise commitment: a seed that expands to a +-1 sequence, scaled by
/// `sigma` when added to an update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnCommitment {
    pub seed: u64,
    pub sigma: f64,
}

impl PnCommitment {
    pub fn new(seed: u64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(DefenseError::InvalidParam(format!(
                "pn sigma {sigma} must be > 0"
            )));
        }
        Ok(Self { seed, sigma })
    }
}

/// Deterministic +-1 sequence of length `dim` for `seed`.
pub fn pn_sequence(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// `update + sigma * s(seed, dim)`.
pub fn pn_commit(update: &WeightVector, c: &PnCommitment) -> Result<WeightVector> {
    let c = PnCommitment::new(c.seed, c.sigma)?;
    let s = pn_sequence(c.seed, update.dim());
    Ok(WeightVector::new(
        update
            .as_slice()
            .iter()
            .zip(&s)
            .map(|(u, si)| u + c.sigma * si)
            .collect(),
    )?)
}

/// `update - sigma * s(seed, dim)`: strips a revealed commitment.
pub fn pn_strip(update: &WeightVector, c: &PnCommitment) -> Result<WeightVector> {
    let s = pn_sequence(c.seed, update.dim());
    Ok(WeightVector::new(
        update
            .as_slice()
            .iter()
            .zip(&s)
            .map(|(u, si)| u - c.sigma * si)
            .collect(),
    )?)
}

/// Pearson correlation between `submitted - claimed_base` and the claimed PN
/// sequence. Accepts iff the correlation is at least `threshold`.
pub fn pn_correlate(
    submitted: &WeightVector,
    claimed_base: &WeightVector,
    c: &PnCommitment,
    threshold: f64,
) -> Result<PolicyVerdict> {
    let residual = submitted.sub(claimed_base)?;
    let s = pn_sequence(c.seed, residual.dim());
    match pearson(residual.as_slice(), &s) {
        None => Ok(PolicyVerdict::reject(0.0, "zero_variance_residual")),
        Some(r) if r >= threshold => Ok(PolicyVerdict::accept(r)),
        Some(r) => Ok(PolicyVerdict::reject(r, "pn_mismatch")),
    }
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va <= 0.0 || vb <= 0.0 {
        return None;
    }
    Some((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}
