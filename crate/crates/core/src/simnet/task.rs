use serde::{Deserialize, Serialize};

use super::{Result, SimError};
use crate::defenses::PolicyConfig;
use crate::fl::{Hyperparams, LabeledDataset, ModelSpec};
use crate::ledger::ShardId;

/// Everything needed to run one federated task over a sharded network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    #[serde(default = "default_task_id")]
    pub task_id: String,
    pub shard_count: usize,
    pub clients_per_shard: usize,
    /// Endorsing peers elected per shard per round.
    pub committee_size: usize,
    /// Peers provisioned per shard; defaults to `committee_size`.
    #[serde(default)]
    pub peers_per_shard: Option<usize>,
    /// Accept endorsements needed to commit; defaults to a strict majority.
    #[serde(default)]
    pub quorum: Option<usize>,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicyConfig>,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    pub model: ModelSpec,
    pub rounds: u64,
    /// Seconds of endorser time consumed per model evaluation.
    #[serde(default = "default_service_time")]
    pub eval_service_time: f64,
    /// Uniform extra service time in `[0, eval_jitter)`.
    #[serde(default)]
    pub eval_jitter: f64,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    /// Delay between the last shard record and mainchain finality.
    #[serde(default = "default_mainchain_latency")]
    pub mainchain_latency: f64,
    /// Start the next round before mainchain finality.
    #[serde(default = "default_true")]
    pub optimistic: bool,
    /// Fraction of each shard's clients sampled per round.
    #[serde(default = "default_fraction")]
    pub client_fraction: f64,
    /// When set, clients attach PN commitments of this amplitude.
    #[serde(default)]
    pub pn_sigma: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_task_id() -> String {
    "task".to_owned()
}

fn default_policies() -> Vec<PolicyConfig> {
    vec![PolicyConfig::AcceptAll]
}

fn default_service_time() -> f64 {
    0.3
}

fn default_timeout() -> f64 {
    30.0
}

fn default_mainchain_latency() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_fraction() -> f64 {
    1.0
}

impl TaskSpec {
    /// A spec with defaults for everything but the topology and model.
    pub fn new(
        shard_count: usize,
        clients_per_shard: usize,
        committee_size: usize,
        model: ModelSpec,
        rounds: u64,
    ) -> Self {
        Self {
            task_id: default_task_id(),
            shard_count,
            clients_per_shard,
            committee_size,
            peers_per_shard: None,
            quorum: None,
            policies: default_policies(),
            hyperparams: Hyperparams::default(),
            model,
            rounds,
            eval_service_time: default_service_time(),
            eval_jitter: 0.0,
            timeout: default_timeout(),
            mainchain_latency: default_mainchain_latency(),
            optimistic: true,
            client_fraction: 1.0,
            pn_sigma: None,
            seed: 0,
        }
    }

    pub fn peers_per_shard(&self) -> usize {
        self.peers_per_shard.unwrap_or(self.committee_size)
    }

    pub fn quorum(&self) -> usize {
        self.quorum.unwrap_or(self.committee_size / 2 + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if self.task_id.is_empty() {
            return bad("task_id must be non-empty".into());
        }
        if self.shard_count == 0 {
            return bad("shard_count must be at least 1".into());
        }
        if self.clients_per_shard == 0 {
            return bad("clients_per_shard must be at least 1".into());
        }
        if self.committee_size == 0 {
            return bad("committee_size must be at least 1".into());
        }
        if self.peers_per_shard() < self.committee_size {
            return bad(format!(
                "peers_per_shard {} is smaller than committee_size {}",
                self.peers_per_shard(),
                self.committee_size
            ));
        }
        let q = self.quorum();
        if q == 0 || q > self.committee_size {
            return bad(format!("quorum {q} must be in 1..={}", self.committee_size));
        }
        if self.rounds == 0 {
            return bad("rounds must be positive".into());
        }
        for (name, v) in [
            ("eval_service_time", self.eval_service_time),
            ("timeout", self.timeout),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("eval_jitter", self.eval_jitter),
            ("mainchain_latency", self.mainchain_latency),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.client_fraction > 0.0 && self.client_fraction <= 1.0) {
            return bad(format!(
                "client_fraction must be in (0, 1], got {}",
                self.client_fraction
            ));
        }
        if let Some(s) = self.pn_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("pn_sigma must be positive, got {s}"));
            }
        }
        if self.policies.is_empty() {
            return bad("policies must list at least one policy".into());
        }
        for p in &self.policies {
            p.validate()?;
        }
        self.hyperparams.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Client,
    Peer,
    EndorsingPeer,
}

/// Client misbehaviour.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Adversary {
    #[default]
    None,
    /// Maps label `c` to `classes - 1 - c` on this fraction of examples.
    LabelFlip { fraction: f64 },
    /// All members of a group submit one update, trained by the member with
    /// the smallest id.
    SybilDuplicate { group: u32 },
    /// Resubmits another client's pending update instead of training.
    LazyCopy,
    /// Uploads bytes that do not match the hash in its metadata.
    TamperedUpload,
}

impl Adversary {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Adversary::LabelFlip { fraction } if !(0.0..=1.0).contains(&fraction) => Err(
                SimError::InvalidSpec(format!("label_flip fraction {fraction} outside [0, 1]")),
            ),
            _ => Ok(()),
        }
    }
}

/// A client or peer. Clients train on `dataset`; peers evaluate on it.
#[derive(Debug, Clone)]
pub struct Participant {
    pub id: u64,
    pub role: Role,
    pub shard_id: ShardId,
    pub dataset: LabeledDataset,
    pub adversary: Adversary,
}

impl Participant {
    pub fn client(id: u64, shard_id: ShardId, dataset: LabeledDataset) -> Self {
        Self {
            id,
            role: Role::Client,
            shard_id,
            dataset,
            adversary: Adversary::None,
        }
    }

    pub fn peer(id: u64, shard_id: ShardId, heldout: LabeledDataset) -> Self {
        Self {
            id,
            role: Role::Peer,
            shard_id,
            dataset: heldout,
            adversary: Adversary::None,
        }
    }
}

/// Turns `p` into an adversary. Label flipping is applied to the dataset
/// here, seeded by `seed`; the other behaviours act at submission time.
pub fn inject_adversary(mut p: Participant, behavior: Adversary, seed: u64) -> Result<Participant> {
    behavior.validate()?;
    if p.role != Role::Client && behavior != Adversary::None {
        return Err(SimError::InvalidSpec(format!(
            "participant {} is not a client",
            p.id
        )));
    }
    if let Adversary::LabelFlip { fraction } = behavior {
        p.dataset = p.dataset.with_flipped_labels(fraction, seed);
    }
    p.adversary = behavior;
    Ok(p)
}
