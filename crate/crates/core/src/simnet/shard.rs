use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::committee::elect_committee;
use super::endorse::{run_endorsements, EndorsementRun, ServiceModel, Submission, TxOutcome};
use super::seeds::derive_seed;
use super::task::{Adversary, Participant, TaskSpec};
use super::{Result, SimError};
use crate::defenses::{
    pn_commit, pn_strip, Candidate, FoolsGoldHistory, PnCommitment, PolicyChain, PolicyVerdict,
};
use crate::fl::{local_train, weighted_mean, LabeledDataset, LocalUpdateResult, WeightVector};
use crate::ledger::{
    cas_uri, decode_weights, encode_weights, parse_cas_uri, ClientId, ContentHash, ContentStore,
    ModelUpdate, PeerId, ShardId, ShardLedger, TxId,
};

/// Shared inputs of one shard round.
pub struct RoundContext<'a> {
    pub task: &'a TaskSpec,
    pub policies: &'a PolicyChain,
    pub global: &'a WeightVector,
    pub round: u64,
    pub start_time: f64,
    /// Updates shared by Sybil groups this round, keyed by group.
    pub sybil_updates: &'a BTreeMap<u32, LocalUpdateResult>,
    /// Number of committee members (lowest ids first) that endorse
    /// everything and collude on a bogus shard record.
    pub compromised: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionSummary {
    pub client_id: ClientId,
    pub tx_id: TxId,
    pub weights_hash: ContentHash,
    pub outcome: TxOutcome,
    /// Distinct reject reasons given by endorsers, sorted.
    pub reject_reasons: Vec<String>,
}

/// A shard's aggregate for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ShardModel {
    pub weights: WeightVector,
    pub model_hash: ContentHash,
    pub sample_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShardRoundReport {
    pub shard_id: ShardId,
    pub round: u64,
    pub committee: BTreeSet<PeerId>,
    pub quorum: usize,
    pub compromised: BTreeSet<PeerId>,
    pub start_time: f64,
    pub finish_time: f64,
    pub submissions: Vec<SubmissionSummary>,
    pub evaluations: u64,
    pub endorsement: EndorsementRun,
    /// `None` for an empty round (nothing committed).
    pub model: Option<ShardModel>,
}

impl ShardRoundReport {
    pub fn count(&self, outcome: TxOutcome) -> usize {
        self.submissions
            .iter()
            .filter(|s| s.outcome == outcome)
            .count()
    }

    pub fn committed_hashes(&self) -> Vec<ContentHash> {
        self.submissions
            .iter()
            .filter(|s| s.outcome == TxOutcome::Committed)
            .map(|s| s.weights_hash)
            .collect()
    }

    pub fn committed_clients(&self) -> Vec<ClientId> {
        self.submissions
            .iter()
            .filter(|s| s.outcome == TxOutcome::Committed)
            .map(|s| s.client_id)
            .collect()
    }
}

/// One shard: its ledger, clients, peers and FoolsGold history.
#[derive(Debug, Clone)]
pub struct ShardNode {
    id: ShardId,
    ledger: ShardLedger,
    clients: Vec<Participant>,
    peers: Vec<Participant>,
    history: FoolsGoldHistory,
}

struct Prepared {
    client_id: ClientId,
    weights: WeightVector,
    pn: Option<PnCommitment>,
    sample_count: u64,
    tampered: bool,
}

impl ShardNode {
    pub fn new(id: ShardId, mut clients: Vec<Participant>, mut peers: Vec<Participant>) -> Self {
        clients.sort_by_key(|p| p.id);
        peers.sort_by_key(|p| p.id);
        Self {
            id,
            ledger: ShardLedger::new(id),
            clients,
            peers,
            history: FoolsGoldHistory::default(),
        }
    }

    pub fn id(&self) -> ShardId {
        self.id
    }

    pub fn ledger(&self) -> &ShardLedger {
        &self.ledger
    }

    pub fn clients(&self) -> &[Participant] {
        &self.clients
    }

    pub fn peer_ids(&self) -> Vec<PeerId> {
        self.peers.iter().map(|p| PeerId(p.id)).collect()
    }

    /// Client training, CAS upload, metadata submission, committee
    /// evaluation, quorum commit and aggregation of the committed updates.
    pub fn run_round(
        &mut self,
        ctx: &RoundContext<'_>,
        cas: &mut dyn ContentStore,
    ) -> Result<ShardRoundReport> {
        let task = ctx.task;
        let shard_seed = derive_seed(task.seed, "shard", &[u64::from(self.id.0)]);
        let peer_ids = self.peer_ids();
        let committee = elect_committee(&peer_ids, task.committee_size, ctx.round, shard_seed)?;
        let quorum = task.quorum();
        self.ledger
            .begin_round(ctx.round, committee.clone(), quorum)?;
        let compromised: BTreeSet<PeerId> =
            committee.iter().take(ctx.compromised).copied().collect();

        let prepared = self.train_clients(ctx, shard_seed)?;

        // Upload and submit.
        let mut submissions = Vec::with_capacity(prepared.len());
        let mut client_of = BTreeMap::new();
        for p in &prepared {
            let bytes = encode_weights(&p.weights);
            let stored = cas.put(&bytes)?;
            let claimed = if p.tampered {
                let mut other = p.weights.clone().into_inner();
                other[0] += 1.0;
                ContentHash::of(&encode_weights(&WeightVector::new(other)?))
            } else {
                stored
            };
            let tx = self.ledger.submit_update(ModelUpdate {
                task_id: task.task_id.clone(),
                round: ctx.round,
                shard_id: self.id,
                client_id: p.client_id,
                weights_hash: claimed,
                weights_uri: cas_uri(&stored),
                sample_count: p.sample_count,
                pn: p.pn,
            })?;
            client_of.insert(tx, p.client_id);
            submissions.push(Submission {
                tx,
                time: ctx.start_time,
                update_hash: claimed,
            });
        }

        // Peer-side fetch and integrity check, shared by all endorsers.
        let mut fetched: BTreeMap<TxId, Option<WeightVector>> = BTreeMap::new();
        let mut candidates = Vec::new();
        let mut candidate_index = BTreeMap::new();
        for s in &submissions {
            let update = self.ledger.pending_update(s.tx).expect("just submitted");
            let weights = fetch_verified(cas, update, task.model.param_count());
            if let Some(w) = &weights {
                candidate_index.insert(s.tx, candidates.len());
                candidates.push(Candidate {
                    client_id: update.client_id.0,
                    weights: w.clone(),
                    pn: update.pn,
                });
            }
            fetched.insert(s.tx, weights);
        }
        let round_view =
            ctx.policies
                .prepare(&task.model, ctx.global, &candidates, &self.history)?;

        let heldout: BTreeMap<PeerId, &LabeledDataset> = self
            .peers
            .iter()
            .map(|p| (PeerId(p.id), &p.dataset))
            .collect();
        let mut reasons: BTreeMap<TxId, BTreeSet<String>> = BTreeMap::new();
        let service = ServiceModel {
            service_time: task.eval_service_time,
            jitter: task.eval_jitter,
        };
        let jitter_seed = derive_seed(shard_seed, "jitter", &[ctx.round]);
        let endorsement = run_endorsements(
            &mut self.ledger,
            &submissions,
            service,
            task.timeout,
            ctx.start_time,
            jitter_seed,
            |peer, tx| {
                let verdict = if compromised.contains(&peer) {
                    PolicyVerdict::accept(1.0)
                } else {
                    match candidate_index.get(&tx) {
                        None => PolicyVerdict::reject(0.0, "integrity_failure"),
                        Some(&i) => round_view.evaluate(i, heldout[&peer])?,
                    }
                };
                if !verdict.is_accept() {
                    reasons
                        .entry(tx)
                        .or_default()
                        .insert(verdict.reason.clone());
                }
                Ok(verdict)
            },
        )?;

        for c in &candidates {
            self.history
                .record(c.client_id, &c.weights.sub(ctx.global)?);
        }

        let summaries: Vec<SubmissionSummary> = endorsement
            .results
            .iter()
            .zip(&submissions)
            .map(|(r, s)| SubmissionSummary {
                client_id: client_of[&r.tx],
                tx_id: r.tx,
                weights_hash: s.update_hash,
                outcome: r.outcome,
                reject_reasons: reasons
                    .remove(&r.tx)
                    .unwrap_or_default()
                    .into_iter()
                    .collect(),
            })
            .collect();

        let model = match shard_aggregate(&self.ledger, ctx.round, cas, task.model.param_count())? {
            Some((weights, sample_count)) => {
                let model_hash = cas.put(&encode_weights(&weights))?;
                Some(ShardModel {
                    weights,
                    model_hash,
                    sample_count,
                })
            }
            None => None,
        };
        let finish_time = endorsement
            .results
            .iter()
            .map(|r| r.end_time)
            .fold(ctx.start_time, f64::max);

        Ok(ShardRoundReport {
            shard_id: self.id,
            round: ctx.round,
            committee,
            quorum,
            compromised,
            start_time: ctx.start_time,
            finish_time,
            submissions: summaries,
            evaluations: endorsement.evaluations,
            endorsement,
            model,
        })
    }

    fn sampled_clients(&self, task: &TaskSpec, round: u64, shard_seed: u64) -> Vec<&Participant> {
        if task.client_fraction >= 1.0 {
            return self.clients.iter().collect();
        }
        let n = self.clients.len();
        let k = ((n as f64 * task.client_fraction).ceil() as usize).clamp(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(shard_seed, "sample", &[round]));
        let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| &self.clients[i]).collect()
    }

    /// Produces what each sampled client submits. Honest and Sybil clients
    /// come first; lazy clients then copy the first of those.
    fn train_clients(&self, ctx: &RoundContext<'_>, shard_seed: u64) -> Result<Vec<Prepared>> {
        let task = ctx.task;
        let sampled = self.sampled_clients(task, ctx.round, shard_seed);
        let commitment = |client: u64| -> Result<Option<PnCommitment>> {
            task.pn_sigma
                .map(|sigma| {
                    PnCommitment::new(derive_seed(task.seed, "pn", &[ctx.round, client]), sigma)
                })
                .transpose()
                .map_err(SimError::from)
        };
        let mut out = Vec::new();
        for p in sampled
            .iter()
            .filter(|p| p.adversary != Adversary::LazyCopy)
        {
            let trained = match p.adversary {
                Adversary::SybilDuplicate { group } => {
                    ctx.sybil_updates.get(&group).cloned().ok_or_else(|| {
                        SimError::InvalidSpec(format!("sybil group {group} has no update"))
                    })?
                }
                _ => local_train(
                    &task.model,
                    ctx.global,
                    &p.dataset,
                    &task.hyperparams,
                    client_train_seed(task.seed, ctx.round, p.id),
                )?,
            };
            let pn = commitment(p.id)?;
            let weights = match &pn {
                Some(c) => pn_commit(&trained.new_weights, c)?,
                None => trained.new_weights,
            };
            out.push(Prepared {
                client_id: ClientId(p.id),
                weights,
                pn,
                sample_count: trained.sample_count,
                tampered: p.adversary == Adversary::TamperedUpload,
            });
        }
        let victim = out.first().map(|v| (v.weights.clone(), v.sample_count));
        if let Some((weights, sample_count)) = victim {
            for p in sampled
                .iter()
                .filter(|p| p.adversary == Adversary::LazyCopy)
            {
                out.push(Prepared {
                    client_id: ClientId(p.id),
                    weights: weights.clone(),
                    pn: commitment(p.id)?,
                    sample_count,
                    tampered: false,
                });
            }
        }
        Ok(out)
    }
}

/// Seed of a client's local training in a round. Independent of the shard
/// layout, so the same client trains identically under any sharding.
pub fn client_train_seed(seed: u64, round: u64, client: u64) -> u64 {
    derive_seed(seed, "train", &[round, client])
}

/// Fetches an update's weights from the CAS by its URI and checks them
/// against the hash in its metadata. `None` on any mismatch.
fn fetch_verified(
    cas: &dyn ContentStore,
    update: &ModelUpdate,
    dim: usize,
) -> Option<WeightVector> {
    let h = parse_cas_uri(&update.weights_uri).ok()?;
    let bytes = cas.get_verified(&h).ok()?;
    if ContentHash::of(&bytes) != update.weights_hash {
        return None;
    }
    let w = decode_weights(&bytes).ok()?;
    (w.dim() == dim).then_some(w)
}

/// FedAvg over the updates of `round` committed on `ledger`, with revealed
/// PN commitments stripped. Committed updates whose payload cannot be
/// fetched and verified are skipped. Returns the model and its sample total,
/// or `None` if nothing usable was committed.
pub fn shard_aggregate(
    ledger: &ShardLedger,
    round: u64,
    cas: &dyn ContentStore,
    dim: usize,
) -> Result<Option<(WeightVector, u64)>> {
    let mut items = Vec::new();
    for (_, update) in ledger.committed_updates(round) {
        let Some(w) = fetch_verified(cas, update, dim) else {
            continue;
        };
        let w = match &update.pn {
            Some(c) => pn_strip(&w, c)?,
            None => w,
        };
        items.push((w, update.sample_count));
    }
    if items.is_empty() {
        return Ok(None);
    }
    let total = items.iter().map(|(_, n)| n).sum();
    let model = weighted_mean(items.iter().map(|(w, n)| (w, *n)))?;
    Ok(Some((model, total)))
}
