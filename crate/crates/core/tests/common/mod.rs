#![allow(dead_code)]

use scalesfl_core::fl::{
    local_train, partition_dataset, LabeledDataset, ModelSpec, PartitionMode, SyntheticTask,
    WeightVector,
};
use scalesfl_core::ledger::ShardId;
use scalesfl_core::simnet::{client_train_seed, Participant, TaskSpec};

/// Client datasets for `count` clients drawn from one synthetic task.
pub fn client_data(count: usize, per_client: usize, dim: usize, seed: u64) -> Vec<LabeledDataset> {
    let all = SyntheticTask::new(dim, 2, count * per_client)
        .generate(seed)
        .unwrap();
    partition_dataset(&all, count, PartitionMode::Iid, seed + 1).unwrap()
}

/// Clients numbered globally; client `k` lives in shard `k / clients_per_shard`.
pub fn clients(task: &TaskSpec, data: &[LabeledDataset]) -> Vec<Participant> {
    data.iter()
        .enumerate()
        .map(|(k, d)| {
            Participant::client(
                k as u64,
                ShardId((k / task.clients_per_shard) as u32),
                d.clone(),
            )
        })
        .collect()
}

/// `peers_per_shard` peers per shard, each holding `heldout`.
pub fn peers(task: &TaskSpec, heldout: &LabeledDataset) -> Vec<Participant> {
    let pps = task.peers_per_shard();
    (0..task.shard_count * pps)
        .map(|j| Participant::peer(j as u64, ShardId((j / pps) as u32), heldout.clone()))
        .collect()
}

pub fn logreg(dim: usize) -> ModelSpec {
    ModelSpec::LogisticRegression {
        features: dim,
        classes: 2,
    }
}

/// Flat FedAvg over all clients, written independently of the crate's
/// aggregation: plain weighted sums in client order.
pub fn flat_fedavg_round(
    task: &TaskSpec,
    global: &WeightVector,
    data: &[LabeledDataset],
    round: u64,
) -> WeightVector {
    let dim = global.dim();
    let mut acc = vec![0.0; dim];
    let mut total = 0u64;
    for (k, d) in data.iter().enumerate() {
        let u = local_train(
            &task.model,
            global,
            d,
            &task.hyperparams,
            client_train_seed(task.seed, round, k as u64),
        )
        .unwrap();
        for (a, w) in acc.iter_mut().zip(u.new_weights.as_slice()) {
            *a += u.sample_count as f64 * w;
        }
        total += u.sample_count;
    }
    WeightVector::new(acc.into_iter().map(|a| a / total as f64).collect()).unwrap()
}

pub fn max_rel_err(a: &WeightVector, b: &WeightVector) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| {
            let diff = (x - y).abs();
            if diff == 0.0 {
                0.0
            } else {
                diff / y.abs().max(1e-300)
            }
        })
        .fold(0.0, f64::max)
}
