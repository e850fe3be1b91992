use std::collections::{BTreeMap, BTreeSet};

use super::{
    Chain, ClientId, EndorsementRecord, LedgerError, ModelUpdate, PeerId, Result, ShardId,
    Transaction, TxId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommitStatus {
    Committed { height: u64 },
    StillPending,
    Rejected,
    TimedOut,
}

#[derive(Debug, Clone)]
struct Pending {
    update: ModelUpdate,
    endorsements: Vec<EndorsementRecord>,
    accepts: usize,
    rejects: usize,
}

/// One shard's ledger: a pending pool of submitted updates, the round's
/// endorsing committee, and the hash chain of committed updates.
///
/// Single owner; every mutation goes through `&mut self`.
#[derive(Debug, Clone)]
pub struct ShardLedger {
    shard_id: ShardId,
    round: u64,
    committee: BTreeSet<PeerId>,
    quorum: usize,
    chain: Chain,
    pending: BTreeMap<TxId, Pending>,
    finalized: BTreeMap<TxId, CommitStatus>,
    endorsed: BTreeSet<(TxId, PeerId)>,
    submitted: BTreeSet<(u64, ClientId)>,
    next_tx: u64,
}

impl ShardLedger {
    pub fn new(shard_id: ShardId) -> Self {
        Self {
            shard_id,
            round: 0,
            committee: BTreeSet::new(),
            quorum: 1,
            chain: Chain::new(),
            pending: BTreeMap::new(),
            finalized: BTreeMap::new(),
            endorsed: BTreeSet::new(),
            submitted: BTreeSet::new(),
            next_tx: 0,
        }
    }

    pub fn shard_id(&self) -> ShardId {
        self.shard_id
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn committee(&self) -> &BTreeSet<PeerId> {
        &self.committee
    }

    pub fn quorum(&self) -> usize {
        self.quorum
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    /// Opens `round` with a newly elected committee. Anything still pending
    /// from earlier rounds is dropped as timed out.
    pub fn begin_round(
        &mut self,
        round: u64,
        committee: BTreeSet<PeerId>,
        quorum: usize,
    ) -> Result<()> {
        if committee.is_empty() || quorum == 0 || quorum > committee.len() {
            return Err(LedgerError::InvalidCommittee(format!(
                "quorum {quorum} with committee of {}",
                committee.len()
            )));
        }
        if round < self.round {
            return Err(LedgerError::StaleRound {
                got: round,
                current: self.round,
            });
        }
        for (tx, _) in std::mem::take(&mut self.pending) {
            self.finalized.insert(tx, CommitStatus::TimedOut);
        }
        self.round = round;
        self.committee = committee;
        self.quorum = quorum;
        Ok(())
    }

    /// Adds an update to the pending pool.
    pub fn submit_update(&mut self, u: ModelUpdate) -> Result<TxId> {
        if u.round < self.round {
            return Err(LedgerError::StaleRound {
                got: u.round,
                current: self.round,
            });
        }
        if u.round > self.round {
            return Err(LedgerError::FutureRound {
                got: u.round,
                current: self.round,
            });
        }
        if u.sample_count == 0 {
            return Err(LedgerError::Malformed(
                "sample_count must be positive".into(),
            ));
        }
        if u.shard_id != self.shard_id {
            return Err(LedgerError::Malformed(format!(
                "update for {} submitted to {}",
                u.shard_id, self.shard_id
            )));
        }
        if u.task_id.is_empty() || u.weights_uri.is_empty() {
            return Err(LedgerError::Malformed(
                "task_id and weights_uri are required".into(),
            ));
        }
        if let Some(pn) = &u.pn {
            if !(pn.sigma > 0.0 && pn.sigma.is_finite()) {
                return Err(LedgerError::Malformed(format!("pn sigma {}", pn.sigma)));
            }
        }
        if !self.submitted.insert((u.round, u.client_id)) {
            return Err(LedgerError::DuplicateSubmission {
                client: u.client_id,
                round: u.round,
            });
        }
        let tx = TxId(self.next_tx);
        self.next_tx += 1;
        self.pending.insert(
            tx,
            Pending {
                update: u,
                endorsements: Vec::new(),
                accepts: 0,
                rejects: 0,
            },
        );
        Ok(tx)
    }

    pub fn pending_update(&self, tx: TxId) -> Option<&ModelUpdate> {
        self.pending.get(&tx).map(|p| &p.update)
    }

    pub fn status(&self, tx: TxId) -> Option<CommitStatus> {
        if self.pending.contains_key(&tx) {
            Some(CommitStatus::StillPending)
        } else {
            self.finalized.get(&tx).copied()
        }
    }

    /// Records one committee member's verdict. Commits the update into a new
    /// block once accepts reach the quorum; rejects it once the quorum can no
    /// longer be reached. Endorsements arriving after the transaction was
    /// finalized are ignored and report the final status.
    pub fn record_endorsement_and_try_commit(
        &mut self,
        e: EndorsementRecord,
    ) -> Result<CommitStatus> {
        if !self.committee.contains(&e.peer_id) {
            return Err(LedgerError::NotCommitteeMember(e.peer_id));
        }
        if !self.endorsed.insert((e.tx_id, e.peer_id)) {
            return Err(LedgerError::DoubleEndorsement {
                peer: e.peer_id,
                tx: e.tx_id,
            });
        }
        let Some(p) = self.pending.get_mut(&e.tx_id) else {
            return self
                .finalized
                .get(&e.tx_id)
                .copied()
                .ok_or(LedgerError::UnknownTransaction(e.tx_id));
        };
        if e.verdict.is_accept() {
            p.accepts += 1;
        } else {
            p.rejects += 1;
        }
        p.endorsements.push(e.clone());

        let status = if p.accepts >= self.quorum {
            let p = self.pending.remove(&e.tx_id).expect("present");
            let block = self.chain.append(vec![Transaction::Update {
                tx_id: e.tx_id,
                update: p.update,
                endorsements: p.endorsements,
            }]);
            CommitStatus::Committed {
                height: block.height,
            }
        } else if p.rejects > self.committee.len() - self.quorum {
            self.pending.remove(&e.tx_id);
            CommitStatus::Rejected
        } else {
            return Ok(CommitStatus::StillPending);
        };
        self.finalized.insert(e.tx_id, status);
        Ok(status)
    }

    /// Marks a still-pending transaction as timed out.
    pub fn expire(&mut self, tx: TxId) -> Option<CommitStatus> {
        if self.pending.remove(&tx).is_some() {
            self.finalized.insert(tx, CommitStatus::TimedOut);
        }
        self.status(tx)
    }

    /// Committed updates of `round`, in commit order.
    pub fn committed_updates(&self, round: u64) -> Vec<(TxId, &ModelUpdate)> {
        self.chain
            .transactions()
            .filter_map(|t| match t {
                Transaction::Update { tx_id, update, .. } if update.round == round => {
                    Some((*tx_id, update))
                }
                _ => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defenses::PolicyVerdict;
    use crate::ledger::{ChainCheck, ContentHash};

    fn update(client: u64, round: u64) -> ModelUpdate {
        let h = ContentHash::of(&client.to_le_bytes());
        ModelUpdate {
            task_id: "t".into(),
            round,
            shard_id: ShardId(0),
            client_id: ClientId(client),
            weights_hash: h,
            weights_uri: crate::ledger::cas_uri(&h),
            sample_count: 10,
            pn: None,
        }
    }

    fn endorse(tx: TxId, peer: u64, accept: bool) -> EndorsementRecord {
        EndorsementRecord {
            tx_id: tx,
            update_hash: ContentHash::ZERO,
            peer_id: PeerId(peer),
            verdict: if accept {
                PolicyVerdict::accept(0.0)
            } else {
                PolicyVerdict::reject(0.0, "no")
            },
            round: 0,
        }
    }

    fn ledger(committee: u64, quorum: usize) -> ShardLedger {
        let mut l = ShardLedger::new(ShardId(0));
        l.begin_round(0, (0..committee).map(PeerId).collect(), quorum)
            .unwrap();
        l
    }

    #[test]
    fn submission_rules() {
        let mut l = ledger(4, 3);
        l.submit_update(update(1, 0)).unwrap();
        assert!(matches!(
            l.submit_update(update(1, 0)),
            Err(LedgerError::DuplicateSubmission { .. })
        ));
        l.begin_round(1, (0..4).map(PeerId).collect(), 3).unwrap();
        assert!(matches!(
            l.submit_update(update(2, 0)),
            Err(LedgerError::StaleRound { got: 0, current: 1 })
        ));
        let mut zero = update(3, 1);
        zero.sample_count = 0;
        assert!(matches!(
            l.submit_update(zero),
            Err(LedgerError::Malformed(_))
        ));
        // Same client may submit again in a new round.
        l.submit_update(update(1, 1)).unwrap();
    }

    #[test]
    fn third_accept_commits() {
        let mut l = ledger(4, 3);
        let tx = l.submit_update(update(1, 0)).unwrap();
        assert_eq!(
            l.record_endorsement_and_try_commit(endorse(tx, 0, true))
                .unwrap(),
            CommitStatus::StillPending
        );
        assert_eq!(
            l.record_endorsement_and_try_commit(endorse(tx, 1, false))
                .unwrap(),
            CommitStatus::StillPending
        );
        assert_eq!(
            l.record_endorsement_and_try_commit(endorse(tx, 2, true))
                .unwrap(),
            CommitStatus::StillPending
        );
        assert_eq!(
            l.record_endorsement_and_try_commit(endorse(tx, 3, true))
                .unwrap(),
            CommitStatus::Committed { height: 1 }
        );
        assert_eq!(l.committed_updates(0).len(), 1);
        assert_eq!(l.chain().verify(), ChainCheck::Ok);
    }

    #[test]
    fn second_reject_makes_quorum_unreachable() {
        let mut l = ledger(4, 3);
        let tx = l.submit_update(update(1, 0)).unwrap();
        l.record_endorsement_and_try_commit(endorse(tx, 0, false))
            .unwrap();
        assert_eq!(
            l.record_endorsement_and_try_commit(endorse(tx, 1, false))
                .unwrap(),
            CommitStatus::Rejected
        );
        // A late endorsement reports the final status.
        assert_eq!(
            l.record_endorsement_and_try_commit(endorse(tx, 2, true))
                .unwrap(),
            CommitStatus::Rejected
        );
        assert!(l.committed_updates(0).is_empty());
    }

    #[test]
    fn endorsement_errors() {
        let mut l = ledger(4, 3);
        let tx = l.submit_update(update(1, 0)).unwrap();
        l.record_endorsement_and_try_commit(endorse(tx, 0, true))
            .unwrap();
        assert!(matches!(
            l.record_endorsement_and_try_commit(endorse(tx, 0, true)),
            Err(LedgerError::DoubleEndorsement { .. })
        ));
        assert!(matches!(
            l.record_endorsement_and_try_commit(endorse(tx, 9, true)),
            Err(LedgerError::NotCommitteeMember(_))
        ));
        assert!(matches!(
            l.record_endorsement_and_try_commit(endorse(TxId(99), 1, true)),
            Err(LedgerError::UnknownTransaction(_))
        ));
    }

    #[test]
    fn expiry() {
        let mut l = ledger(2, 2);
        let tx = l.submit_update(update(1, 0)).unwrap();
        assert_eq!(l.expire(tx), Some(CommitStatus::TimedOut));
        assert_eq!(
            l.record_endorsement_and_try_commit(endorse(tx, 0, true))
                .unwrap(),
            CommitStatus::TimedOut
        );
    }

    /// Every verdict sequence for committees up to 5: committed iff accepts
    /// reach the quorum before rejects make it unreachable, which for a full
    /// sequence of votes is simply `accepts >= quorum`.
    #[test]
    fn exhaustive_quorum_law() {
        for size in 1..=5u64 {
            for quorum in 1..=size as usize {
                for mask in 0..(1u32 << size) {
                    let mut l = ledger(size, quorum);
                    let tx = l.submit_update(update(1, 0)).unwrap();
                    let mut last = CommitStatus::StillPending;
                    for peer in 0..size {
                        last = l
                            .record_endorsement_and_try_commit(endorse(
                                tx,
                                peer,
                                mask & (1 << peer) != 0,
                            ))
                            .unwrap();
                    }
                    let accepts = mask.count_ones() as usize;
                    let committed = matches!(last, CommitStatus::Committed { .. });
                    assert_eq!(
                        committed,
                        accepts >= quorum,
                        "size {size} quorum {quorum} mask {mask:b}"
                    );
                    assert_eq!(last == CommitStatus::Rejected, accepts < quorum);
                }
            }
        }
    }
}
