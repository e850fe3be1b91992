use super::{FlError, LocalUpdateResult, Result, WeightVector};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Sample-count weighted mean `sum_k n_k w_k / sum_k n_k`, with compensated
/// summation per coordinate.
pub fn weighted_mean<'a, I>(items: I) -> Result<WeightVector>
where
    I: IntoIterator<Item = (&'a WeightVector, u64)>,
{
    let mut items = items.into_iter().peekable();
    let dim = items
        .peek()
        .ok_or(FlError::Empty("aggregation input"))?
        .0
        .dim();
    let mut sums = vec![KahanSum::default(); dim];
    let mut total = 0u64;
    for (w, count) in items {
        w.check_dim(dim)?;
        if count == 0 {
            return Err(FlError::ZeroSampleCount);
        }
        total += count;
        let n = count as f64;
        for (s, v) in sums.iter_mut().zip(w.as_slice()) {
            s.add(n * v);
        }
    }
    let total = total as f64;
    WeightVector::new(sums.iter().map(|s| s.total() / total).collect())
}

/// Shard-level FedAvg: weights normalised by the shard's own sample total.
pub fn aggregate_shard(updates: &[LocalUpdateResult]) -> Result<WeightVector> {
    weighted_mean(updates.iter().map(|u| (&u.new_weights, u.sample_count)))
}

/// Mainchain aggregation of shard models weighted by shard sample totals.
pub fn aggregate_global(shard_models: &[(WeightVector, u64)]) -> Result<WeightVector> {
    weighted_mean(shard_models.iter().map(|(w, n)| (w, *n)))
}
