use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::endorse::TxOutcome;
use super::shard::{client_train_seed, shard_aggregate, RoundContext, ShardNode, ShardRoundReport};
use super::task::{Adversary, Participant, Role, TaskSpec};
use super::{Result, SimError};
use crate::defenses::PolicyChain;
use crate::fl::{aggregate_global, local_train, WeightVector};
use crate::ledger::{
    decode_weights, encode_weights, ContentHash, ContentStore, Mainchain, MainchainOutcome,
    MemoryStore, ShardId, ShardModelRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardSummary {
    pub shard_id: ShardId,
    pub accepted: usize,
    pub rejected: usize,
    pub timed_out: usize,
    pub evaluations: u64,
    pub start_time: f64,
    pub finish_time: f64,
    /// Mainchain verdict on the shard's record; `None` for an empty round.
    pub record: Option<String>,
}

/// Result of one global round, emitted as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub round: u64,
    /// Global model after the round; the previous one if the round failed.
    pub global_model_hash: ContentHash,
    /// No shard record was accepted.
    pub failed: bool,
    pub shards: Vec<ShardSummary>,
    pub restarted_shards: Vec<ShardId>,
    pub evaluations: u64,
    pub finality_time: f64,
}

impl RoundOutcome {
    pub fn write_jsonl<W: Write>(outcomes: &[RoundOutcome], mut out: W) -> std::io::Result<()> {
        for o in outcomes {
            serde_json::to_writer(&mut out, o)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A full ScaleSFL deployment: shards, mainchain and the shared CAS.
pub struct Network {
    task: TaskSpec,
    policies: PolicyChain,
    shards: Vec<ShardNode>,
    mainchain: Mainchain,
    cas: Box<dyn ContentStore>,
    global: WeightVector,
    global_hash: ContentHash,
    round: u64,
    start_times: Vec<f64>,
    compromised: BTreeSet<(ShardId, u64)>,
    sybil_leaders: BTreeMap<u32, usize>,
    clients: Vec<Participant>,
    last_reports: Vec<ShardRoundReport>,
}

impl Network {
    /// Builds the network with an in-memory CAS. Clients and peers are
    /// grouped by their `shard_id`; the initial global model is the
    /// model's seeded initialisation.
    pub fn new(task: TaskSpec, clients: Vec<Participant>, peers: Vec<Participant>) -> Result<Self> {
        Self::with_store(task, clients, peers, Box::new(MemoryStore::new()))
    }

    pub fn with_store(
        task: TaskSpec,
        clients: Vec<Participant>,
        peers: Vec<Participant>,
        mut cas: Box<dyn ContentStore>,
    ) -> Result<Self> {
        task.validate()?;
        let policies = PolicyChain::new(task.policies.clone())?;
        let s = task.shard_count;
        let mut shard_clients: Vec<Vec<Participant>> = vec![Vec::new(); s];
        let mut shard_peers: Vec<Vec<Participant>> = vec![Vec::new(); s];
        let mut seen_clients = BTreeSet::new();
        let mut seen_peers = BTreeSet::new();
        for p in &clients {
            let idx = shard_index(p, s)?;
            if p.role != Role::Client || !seen_clients.insert(p.id) {
                return Err(SimError::InvalidSpec(format!(
                    "client {} is duplicated or not a client",
                    p.id
                )));
            }
            if p.dataset.feature_dim() != task.model.feature_dim() {
                return Err(SimError::InvalidSpec(format!(
                    "client {} has feature dim {}",
                    p.id,
                    p.dataset.feature_dim()
                )));
            }
            p.adversary.validate()?;
            shard_clients[idx].push(p.clone());
        }
        for p in &peers {
            let idx = shard_index(p, s)?;
            if p.role == Role::Client || !seen_peers.insert(p.id) {
                return Err(SimError::InvalidSpec(format!(
                    "peer {} is duplicated or not a peer",
                    p.id
                )));
            }
            shard_peers[idx].push(p.clone());
        }
        for i in 0..s {
            if shard_clients[i].len() != task.clients_per_shard {
                return Err(SimError::InvalidSpec(format!(
                    "shard {i} has {} clients, expected {}",
                    shard_clients[i].len(),
                    task.clients_per_shard
                )));
            }
            if shard_peers[i].len() != task.peers_per_shard() {
                return Err(SimError::InvalidSpec(format!(
                    "shard {i} has {} peers, expected {}",
                    shard_peers[i].len(),
                    task.peers_per_shard()
                )));
            }
        }
        let mut sorted_clients = clients;
        sorted_clients.sort_by_key(|p| p.id);
        let mut sybil_leaders = BTreeMap::new();
        for (i, p) in sorted_clients.iter().enumerate() {
            if let Adversary::SybilDuplicate { group } = p.adversary {
                sybil_leaders.entry(group).or_insert(i);
            }
        }
        let shards = shard_clients
            .into_iter()
            .zip(shard_peers)
            .enumerate()
            .map(|(i, (c, p))| ShardNode::new(ShardId(i as u32), c, p))
            .collect();
        let global = task.model.init_weights(task.seed);
        let global_hash = cas.put(&encode_weights(&global))?;
        Ok(Self {
            start_times: vec![0.0; s],
            task,
            policies,
            shards,
            mainchain: Mainchain::new(),
            cas,
            global,
            global_hash,
            round: 0,
            compromised: BTreeSet::new(),
            sybil_leaders,
            clients: sorted_clients,
            last_reports: Vec::new(),
        })
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn global(&self) -> &WeightVector {
        &self.global
    }

    pub fn global_hash(&self) -> ContentHash {
        self.global_hash
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn mainchain(&self) -> &Mainchain {
        &self.mainchain
    }

    pub fn cas(&self) -> &dyn ContentStore {
        self.cas.as_ref()
    }

    pub fn shards(&self) -> &[ShardNode] {
        &self.shards
    }

    /// Per-shard reports of the last completed round.
    pub fn last_reports(&self) -> &[ShardRoundReport] {
        &self.last_reports
    }

    /// Scripts a majority-compromised committee in `shard` at `round`: a
    /// quorum of its members endorse everything and back a bogus shard
    /// record.
    pub fn compromise_shard(&mut self, shard: ShardId, round: u64) {
        self.compromised.insert((shard, round));
    }

    fn sybil_updates(&self) -> Result<BTreeMap<u32, crate::fl::LocalUpdateResult>> {
        self.sybil_leaders
            .iter()
            .map(|(&group, &i)| {
                let leader = &self.clients[i];
                let update = local_train(
                    &self.task.model,
                    &self.global,
                    &leader.dataset,
                    &self.task.hyperparams,
                    client_train_seed(self.task.seed, self.round, leader.id),
                )?;
                Ok((group, update))
            })
            .collect()
    }

    /// Runs every shard for the current round, settles shard records on the
    /// mainchain and publishes the new global model.
    pub fn run_global_round(&mut self) -> Result<RoundOutcome> {
        let round = self.round;
        let sybil = self.sybil_updates()?;
        let quorum = self.task.quorum();
        let mut reports = Vec::with_capacity(self.shards.len());
        for (i, shard) in self.shards.iter_mut().enumerate() {
            let compromised = if self.compromised.contains(&(shard.id(), round)) {
                quorum
            } else {
                0
            };
            let ctx = RoundContext {
                task: &self.task,
                policies: &self.policies,
                global: &self.global,
                round,
                start_time: self.start_times[i],
                sybil_updates: &sybil,
                compromised,
            };
            reports.push(shard.run_round(&ctx, self.cas.as_mut())?);
        }

        let dim = self.task.model.param_count();
        let mut verdicts: Vec<Option<String>> = vec![None; reports.len()];
        for (i, report) in reports.iter().enumerate() {
            let Some(model) = &report.model else { continue };
            self.mainchain.register_committee(
                report.shard_id,
                round,
                report.committee.clone(),
                quorum as u64,
            );
            // The mainchain recomputes the aggregate from on-chain updates.
            let reference =
                shard_aggregate(self.shards[i].ledger(), round, self.cas.as_ref(), dim)?
                    .map(|(w, _)| ContentHash::of(&encode_weights(&w)));
            let honest: Vec<_> = report
                .committee
                .difference(&report.compromised)
                .copied()
                .collect();
            let mut outcomes = Vec::new();
            if !report.compromised.is_empty() {
                let bogus =
                    WeightVector::new(model.weights.as_slice().iter().map(|v| v + 1.0).collect())?;
                let bogus_hash = self.cas.put(&encode_weights(&bogus))?;
                let record = ShardModelRecord {
                    shard_id: report.shard_id,
                    round,
                    model_hash: bogus_hash,
                    endorsement_count: report.compromised.len() as u64,
                    shard_sample_count: model.sample_count,
                };
                for peer in &report.compromised {
                    let valid = reference == Some(bogus_hash);
                    outcomes.push(self.mainchain.submit_shard_model(
                        *peer,
                        record.clone(),
                        valid,
                    )?);
                }
            }
            let record = ShardModelRecord {
                shard_id: report.shard_id,
                round,
                model_hash: model.model_hash,
                endorsement_count: honest.len() as u64,
                shard_sample_count: model.sample_count,
            };
            for peer in &honest {
                let valid = reference == Some(model.model_hash);
                outcomes.push(
                    self.mainchain
                        .submit_shard_model(*peer, record.clone(), valid)?,
                );
            }
            let won = self
                .mainchain
                .winner(report.shard_id, round)
                .map(|w| w.model_hash)
                == Some(model.model_hash);
            verdicts[i] = Some(if won {
                "accepted".to_owned()
            } else {
                outcomes
                    .iter()
                    .rev()
                    .find_map(|o| match o {
                        MainchainOutcome::Rejected(r) => Some((*r).to_owned()),
                        MainchainOutcome::Superseded => Some("superseded".to_owned()),
                        MainchainOutcome::Accepted => None,
                    })
                    .unwrap_or_else(|| "superseded".to_owned())
            });
        }

        let winners = self.mainchain.winners(round);
        let failed = winners.is_empty();
        if failed {
            self.mainchain.abandon_round(round);
        } else {
            let mut models = Vec::with_capacity(winners.len());
            for w in &winners {
                let bytes = self.cas.get_verified(&w.model_hash)?;
                models.push((decode_weights(&bytes)?, w.shard_sample_count));
            }
            let global = aggregate_global(&models)?;
            let global_hash = self.cas.put(&encode_weights(&global))?;
            self.mainchain.finalize_round(round, global_hash);
            self.global = global;
            self.global_hash = global_hash;
        }

        let won: BTreeSet<ShardId> = winners.iter().map(|w| w.shard_id).collect();
        let restarted: Vec<ShardId> = reports
            .iter()
            .filter(|r| r.model.is_some() && !won.contains(&r.shard_id))
            .map(|r| r.shard_id)
            .collect();

        let records_ready = reports.iter().map(|r| r.finish_time).fold(0.0, f64::max);
        let finality_time = records_ready + self.task.mainchain_latency;
        for (i, r) in reports.iter().enumerate() {
            self.start_times[i] = if self.task.optimistic && !restarted.contains(&r.shard_id) {
                records_ready
            } else {
                finality_time
            };
        }

        let shards = reports
            .iter()
            .zip(verdicts)
            .map(|(r, record)| ShardSummary {
                shard_id: r.shard_id,
                accepted: r.count(TxOutcome::Committed),
                rejected: r.count(TxOutcome::Rejected),
                timed_out: r.count(TxOutcome::TimedOut),
                evaluations: r.evaluations,
                start_time: r.start_time,
                finish_time: r.finish_time,
                record,
            })
            .collect();
        let outcome = RoundOutcome {
            round,
            global_model_hash: self.global_hash,
            failed,
            shards,
            restarted_shards: restarted,
            evaluations: reports.iter().map(|r| r.evaluations).sum(),
            finality_time,
        };
        self.last_reports = reports;
        self.round += 1;
        Ok(outcome)
    }

    /// Runs all remaining rounds of the task.
    pub fn run(&mut self) -> Result<Vec<RoundOutcome>> {
        let mut out = Vec::new();
        while self.round < self.task.rounds {
            out.push(self.run_global_round()?);
        }
        Ok(out)
    }
}

fn shard_index(p: &Participant, shard_count: usize) -> Result<usize> {
    let idx = p.shard_id.0 as usize;
    if idx >= shard_count {
        return Err(SimError::InvalidSpec(format!(
            "participant {} assigned to {} but only {shard_count} shards exist",
            p.id, p.shard_id
        )));
    }
    Ok(idx)
}

/// Policy evaluations per shard and in total per round when `clients` and
/// `endorsers` are split evenly over `shards`, with ceiling division for
/// uneven splits.
pub fn count_evaluations(shards: u64, clients: u64, endorsers: u64) -> (u64, u64) {
    assert!(shards > 0, "at least one shard");
    let per_shard = clients.div_ceil(shards) * endorsers.div_ceil(shards);
    (per_shard, shards * per_shard)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_counts() {
        assert_eq!(count_evaluations(8, 64, 8), (8, 64));
        assert_eq!(count_evaluations(1, 64, 8), (512, 512));
        assert_eq!(count_evaluations(4, 64, 8), (32, 128));
        assert_eq!(count_evaluations(3, 10, 4), (8, 24));
    }
}
