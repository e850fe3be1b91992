//! `train` and `attack`: federated rounds over a simulated network.

use std::collections::BTreeMap;

use serde::Serialize;

use scalesfl_core::fl::{evaluate, partition_dataset, LabeledDataset, PartitionMode};
use scalesfl_core::ledger::{ChainCheck, ContentStore, DiskStore, ShardId};
use scalesfl_core::simnet::{
    derive_seed, inject_adversary, Adversary, Network, Participant, RoundOutcome, TxOutcome,
};

use crate::artifacts::ArtifactSet;
use crate::{CliError, LoadedConfig};

/// One line of the per-round metrics file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRow {
    pub round: u64,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub timed_out: usize,
    pub restarted_shards: usize,
    pub failed: bool,
    pub evaluations: u64,
    pub finality_time: f64,
    pub global_model_hash: String,
}

/// One client submission, written by `attack`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmissionRow {
    pub round: u64,
    pub shard_id: u32,
    pub client_id: u64,
    pub adversary: &'static str,
    pub outcome: TxOutcome,
    /// Distinct endorser reject reasons, `;`-separated.
    pub reasons: String,
}

#[derive(Debug)]
pub struct TrainSummary {
    pub rows: Vec<RoundRow>,
    pub final_model_hash: String,
}

fn adversary_name(a: &Adversary) -> &'static str {
    match a {
        Adversary::None => "none",
        Adversary::LabelFlip { .. } => "label_flip",
        Adversary::SybilDuplicate { .. } => "sybil_duplicate",
        Adversary::LazyCopy => "lazy_copy",
        Adversary::TamperedUpload => "tampered_upload",
    }
}

/// Splits the dataset, builds clients and peers, and opens the CAS under
/// the output directory. Returns the network and the test set.
pub fn build_network(
    loaded: &LoadedConfig,
    store: Box<dyn ContentStore>,
) -> Result<(Network, LabeledDataset), CliError> {
    let cfg = &loaded.config;
    let task = &cfg.task;
    let seed = task.seed;
    let data = cfg
        .dataset
        .load(&loaded.base_dir, derive_seed(seed, "dataset", &[]))?;
    if data.feature_dim() != task.model.feature_dim() {
        return Err(CliError::Config(format!(
            "task.model: expects {} features but the dataset has {}",
            task.model.feature_dim(),
            data.feature_dim()
        )));
    }
    if data.class_count() > task.model.class_count() {
        return Err(CliError::Config(format!(
            "task.model: has {} classes but the dataset has {}",
            task.model.class_count(),
            data.class_count()
        )));
    }
    let split = |d: &LabeledDataset, f: f64, purpose: &str| {
        d.train_test_split(f, derive_seed(seed, purpose, &[]))
            .map_err(|e| CliError::Config(format!("dataset: {e}")))
    };
    let (train, test) = split(&data, cfg.test_fraction, "split")?;
    let (pool, validation) = split(&train, cfg.validation_fraction, "validation")?;

    let cps = task.clients_per_shard;
    let n = task.shard_count * cps;
    let mode = cfg.partition.unwrap_or(PartitionMode::Iid);
    let parts = partition_dataset(&pool, n, mode, derive_seed(seed, "partition", &[]))
        .map_err(|e| CliError::Config(format!("partition: {e}")))?;
    let smallest = parts.iter().map(LabeledDataset::len).min().unwrap_or(0);
    if task.hyperparams.batch_size > smallest {
        return Err(CliError::Config(format!(
            "task.hyperparams.batch_size: {} exceeds the smallest client dataset ({smallest} examples)",
            task.hyperparams.batch_size
        )));
    }

    let roster: BTreeMap<u64, Adversary> = cfg
        .adversaries
        .iter()
        .flat_map(|g| g.clients.iter().map(move |&c| (c, g.behavior)))
        .collect();
    let clients = parts
        .into_iter()
        .enumerate()
        .map(|(k, d)| {
            let id = k as u64;
            let p = Participant::client(id, ShardId((k / cps) as u32), d);
            match roster.get(&id) {
                Some(&b) => inject_adversary(p, b, derive_seed(seed, "adversary", &[id])),
                None => Ok(p),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pps = task.peers_per_shard();
    let peers = (0..task.shard_count * pps)
        .map(|j| Participant::peer(j as u64, ShardId((j / pps) as u32), validation.clone()))
        .collect();

    let mut net = Network::with_store(task.clone(), clients, peers, store)?;
    for c in &cfg.compromised {
        net.compromise_shard(ShardId(c.shard), c.round);
    }
    Ok((net, test))
}

/// Runs every round and writes metrics, round outcomes, ledger exports and
/// the manifest. With `attack` set, also writes per-submission outcomes.
pub fn run_training(loaded: &LoadedConfig, attack: bool) -> Result<TrainSummary, CliError> {
    let cfg = &loaded.config;
    if attack && cfg.adversaries.is_empty() && cfg.compromised.is_empty() {
        return Err(CliError::Config(
            "adversaries: attack needs at least one adversary group or compromised shard".into(),
        ));
    }
    let mut out = ArtifactSet::new(loaded.output_dir())?;
    let store = DiskStore::open(out.root().join("cas")).map_err(|e| CliError::Io(e.to_string()))?;
    let (mut net, test) = build_network(loaded, Box::new(store))?;
    let adversaries: BTreeMap<u64, Adversary> = net
        .shards()
        .iter()
        .flat_map(|s| s.clients().iter().map(|c| (c.id, c.adversary)))
        .collect();

    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    let mut submissions = Vec::new();
    for _ in 0..cfg.task.rounds {
        let outcome = net.run_global_round()?;
        let (test_loss, test_accuracy) = evaluate(&cfg.task.model, net.global(), &test)
            .map_err(|e| CliError::Invariant(e.to_string()))?;
        rows.push(round_row(&outcome, test_loss, test_accuracy));
        if attack {
            for report in net.last_reports() {
                for s in &report.submissions {
                    submissions.push(SubmissionRow {
                        round: report.round,
                        shard_id: report.shard_id.0,
                        client_id: s.client_id.0,
                        adversary: adversary_name(&adversaries[&s.client_id.0]),
                        outcome: s.outcome,
                        reasons: s.reject_reasons.join(";"),
                    });
                }
            }
        }
        outcomes.push(outcome);
    }

    check_ledgers(&net)?;
    let final_model_hash = net.global_hash().to_hex();

    out.write_rows("rounds", cfg.format, &rows)?;
    if attack {
        out.write_rows("submissions", cfg.format, &submissions)?;
    }
    out.write("round_outcomes.jsonl", |w| {
        Ok(RoundOutcome::write_jsonl(&outcomes, w)?)
    })?;
    export_ledgers(&net, &mut out)?;
    let extra = BTreeMap::from([("final_model".to_owned(), final_model_hash.clone())]);
    out.finish(if attack { "attack" } else { "train" }, cfg, extra)?;
    Ok(TrainSummary {
        rows,
        final_model_hash,
    })
}

fn round_row(o: &RoundOutcome, test_loss: f64, test_accuracy: f64) -> RoundRow {
    let sum = |f: fn(&scalesfl_core::simnet::ShardSummary) -> usize| o.shards.iter().map(f).sum();
    RoundRow {
        round: o.round,
        test_loss,
        test_accuracy,
        accepted: sum(|s| s.accepted),
        rejected: sum(|s| s.rejected),
        timed_out: sum(|s| s.timed_out),
        restarted_shards: o.restarted_shards.len(),
        failed: o.failed,
        evaluations: o.evaluations,
        finality_time: o.finality_time,
        global_model_hash: o.global_model_hash.to_hex(),
    }
}

/// Every chain must verify and the final global model must be retrievable.
fn check_ledgers(net: &Network) -> Result<(), CliError> {
    if let ChainCheck::CorruptAt(h) = net.mainchain().chain().verify() {
        return Err(CliError::Invariant(format!(
            "mainchain corrupt at height {h}"
        )));
    }
    for s in net.shards() {
        if let ChainCheck::CorruptAt(h) = s.ledger().chain().verify() {
            return Err(CliError::Invariant(format!(
                "{} ledger corrupt at height {h}",
                s.id()
            )));
        }
    }
    net.cas()
        .get_verified(&net.global_hash())
        .map_err(|e| CliError::Invariant(format!("final model not in the CAS: {e}")))?;
    Ok(())
}

fn export_ledgers(net: &Network, out: &mut ArtifactSet) -> Result<(), CliError> {
    let io = |e: scalesfl_core::ledger::LedgerError| CliError::Io(e.to_string());
    out.write("ledger/mainchain.jsonl", |w| {
        net.mainchain().chain().write_jsonl(w).map_err(io)
    })?;
    for s in net.shards() {
        out.write(&format!("ledger/shard-{:03}.jsonl", s.id().0), |w| {
            s.ledger().chain().write_jsonl(w).map_err(io)
        })?;
    }
    Ok(())
}
