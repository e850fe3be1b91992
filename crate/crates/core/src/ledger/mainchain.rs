use std::collections::{BTreeMap, BTreeSet};

use super::{
    Chain, ContentHash, LedgerError, PeerId, Result, ShardId, ShardModelRecord, Transaction,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MainchainOutcome {
    /// The record is (currently) the winning candidate for its shard/round.
    Accepted,
    /// A competing record with more endorsements (or an equal count and a
    /// smaller model hash) holds the slot.
    Superseded,
    Rejected(&'static str),
}

#[derive(Debug, Clone)]
struct Committee {
    members: BTreeSet<PeerId>,
    quorum: u64,
}

/// Coordination chain: one finalized shard model per (shard, round) and the
/// global model aggregated from them.
#[derive(Debug, Clone, Default)]
pub struct Mainchain {
    chain: Chain,
    committees: BTreeMap<(ShardId, u64), Committee>,
    best: BTreeMap<(ShardId, u64), (ShardModelRecord, PeerId)>,
    finalized_rounds: BTreeSet<u64>,
}

impl Mainchain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn register_committee(
        &mut self,
        shard: ShardId,
        round: u64,
        members: BTreeSet<PeerId>,
        quorum: u64,
    ) {
        self.committees
            .insert((shard, round), Committee { members, quorum });
    }

    /// Offers a shard model record. Only endorsing peers of that shard and
    /// round may submit. `valid` is the mainchain's content check of the
    /// record (e.g. recomputing the shard aggregate from on-chain updates).
    pub fn submit_shard_model(
        &mut self,
        submitter: PeerId,
        record: ShardModelRecord,
        valid: bool,
    ) -> Result<MainchainOutcome> {
        let key = (record.shard_id, record.round);
        let committee = self
            .committees
            .get(&key)
            .filter(|c| c.members.contains(&submitter))
            .ok_or(LedgerError::NonEndorsingSubmitter {
                peer: submitter,
                shard: record.shard_id,
                round: record.round,
            })?;
        if self.finalized_rounds.contains(&record.round) {
            return Ok(MainchainOutcome::Rejected("round_finalized"));
        }
        if record.endorsement_count > committee.members.len() as u64 {
            return Ok(MainchainOutcome::Rejected("count_exceeds_committee"));
        }
        if record.endorsement_count < committee.quorum {
            return Ok(MainchainOutcome::Rejected("below_quorum"));
        }
        if record.shard_sample_count == 0 {
            return Ok(MainchainOutcome::Rejected("empty_shard"));
        }
        if !valid {
            return Ok(MainchainOutcome::Rejected("invalid_model"));
        }
        match self.best.get(&key) {
            Some((current, _)) if current.model_hash == record.model_hash => {
                // Same model from another endorser: evaluated once, keep the
                // larger endorsement count.
                if record.endorsement_count > current.endorsement_count {
                    self.best.insert(key, (record, submitter));
                }
                Ok(MainchainOutcome::Accepted)
            }
            Some((current, _)) if !beats(&record, current) => Ok(MainchainOutcome::Superseded),
            _ => {
                self.best.insert(key, (record, submitter));
                Ok(MainchainOutcome::Accepted)
            }
        }
    }

    /// Current winning record for (shard, round), if any.
    pub fn winner(&self, shard: ShardId, round: u64) -> Option<&ShardModelRecord> {
        self.best.get(&(shard, round)).map(|(r, _)| r)
    }

    /// Winning records of `round`, by shard.
    pub fn winners(&self, round: u64) -> Vec<ShardModelRecord> {
        self.best
            .iter()
            .filter(|((_, r), _)| *r == round)
            .map(|(_, (rec, _))| rec.clone())
            .collect()
    }

    /// Pins the round's winning shard records and the global model hash in
    /// one block. Later submissions for the round are rejected.
    pub fn finalize_round(&mut self, round: u64, global_hash: ContentHash) -> u64 {
        let winners: Vec<(ShardModelRecord, PeerId)> = self
            .best
            .iter()
            .filter(|((_, r), _)| *r == round)
            .map(|(_, v)| v.clone())
            .collect();
        let shards = winners.iter().map(|(r, _)| r.shard_id).collect();
        let mut payload: Vec<Transaction> = winners
            .into_iter()
            .map(|(record, submitter)| Transaction::ShardModel { record, submitter })
            .collect();
        payload.push(Transaction::GlobalModel {
            round,
            model_hash: global_hash,
            shards,
        });
        self.finalized_rounds.insert(round);
        self.chain.append(payload).height
    }

    /// Closes a round in which no shard record was accepted.
    pub fn abandon_round(&mut self, round: u64) {
        self.finalized_rounds.insert(round);
    }

    pub fn global_model_hash(&self, round: u64) -> Option<ContentHash> {
        self.chain.transactions().find_map(|t| match t {
            Transaction::GlobalModel {
                round: r,
                model_hash,
                ..
            } if *r == round => Some(*model_hash),
            _ => None,
        })
    }
}

/// Higher endorsement count wins; equal counts go to the smaller hash.
fn beats(a: &ShardModelRecord, b: &ShardModelRecord) -> bool {
    a.endorsement_count > b.endorsement_count
        || (a.endorsement_count == b.endorsement_count && a.model_hash < b.model_hash)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::ChainCheck;

    fn record(count: u64, tag: &[u8]) -> ShardModelRecord {
        ShardModelRecord {
            shard_id: ShardId(2),
            round: 0,
            model_hash: ContentHash::of(tag),
            endorsement_count: count,
            shard_sample_count: 50,
        }
    }

    fn mainchain() -> Mainchain {
        let mut m = Mainchain::new();
        m.register_committee(ShardId(2), 0, (0..4).map(PeerId).collect(), 2);
        m
    }

    #[test]
    fn single_record_accepted() {
        let mut m = mainchain();
        assert_eq!(
            m.submit_shard_model(PeerId(0), record(3, b"a"), true)
                .unwrap(),
            MainchainOutcome::Accepted
        );
        m.finalize_round(0, ContentHash::of(b"g"));
        assert_eq!(m.global_model_hash(0), Some(ContentHash::of(b"g")));
        assert_eq!(m.chain().verify(), ChainCheck::Ok);
    }

    #[test]
    fn more_endorsements_win() {
        let mut m = mainchain();
        m.submit_shard_model(PeerId(0), record(2, b"two"), true)
            .unwrap();
        assert_eq!(
            m.submit_shard_model(PeerId(1), record(3, b"three"), true)
                .unwrap(),
            MainchainOutcome::Accepted
        );
        assert_eq!(
            m.submit_shard_model(PeerId(2), record(2, b"late"), true)
                .unwrap(),
            MainchainOutcome::Superseded
        );
        assert_eq!(m.winner(ShardId(2), 0).unwrap().endorsement_count, 3);
    }

    #[test]
    fn identical_hash_is_deduplicated() {
        let mut m = mainchain();
        m.submit_shard_model(PeerId(0), record(3, b"same"), true)
            .unwrap();
        assert_eq!(
            m.submit_shard_model(PeerId(1), record(3, b"same"), true)
                .unwrap(),
            MainchainOutcome::Accepted
        );
        assert_eq!(m.winners(0).len(), 1);
        m.finalize_round(0, ContentHash::ZERO);
        let shard_records = m
            .chain()
            .transactions()
            .filter(|t| matches!(t, Transaction::ShardModel { .. }))
            .count();
        assert_eq!(shard_records, 1);
    }

    #[test]
    fn submission_checks() {
        let mut m = mainchain();
        assert!(matches!(
            m.submit_shard_model(PeerId(9), record(3, b"a"), true),
            Err(LedgerError::NonEndorsingSubmitter { .. })
        ));
        assert_eq!(
            m.submit_shard_model(PeerId(0), record(1, b"a"), true)
                .unwrap(),
            MainchainOutcome::Rejected("below_quorum")
        );
        assert_eq!(
            m.submit_shard_model(PeerId(0), record(5, b"a"), true)
                .unwrap(),
            MainchainOutcome::Rejected("count_exceeds_committee")
        );
        assert_eq!(
            m.submit_shard_model(PeerId(0), record(3, b"a"), false)
                .unwrap(),
            MainchainOutcome::Rejected("invalid_model")
        );
        m.finalize_round(0, ContentHash::ZERO);
        assert_eq!(
            m.submit_shard_model(PeerId(0), record(3, b"a"), true)
                .unwrap(),
            MainchainOutcome::Rejected("round_finalized")
        );
    }

    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.to_vec();
            let head = rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, head);
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn winner_independent_of_submission_order() {
        let records = [
            record(2, b"a"),
            record(3, b"b"),
            record(3, b"c"),
            record(4, b"d"),
            record(4, b"e"),
        ];
        for subset in 1u32..(1 << records.len()) {
            let chosen: Vec<usize> = (0..records.len())
                .filter(|i| subset & (1 << i) != 0)
                .collect();
            let expected = chosen
                .iter()
                .map(|&i| &records[i])
                .max_by(|a, b| {
                    a.endorsement_count
                        .cmp(&b.endorsement_count)
                        .then(b.model_hash.cmp(&a.model_hash))
                })
                .unwrap();
            for order in permutations(&chosen) {
                let mut m = mainchain();
                for (peer, &i) in order.iter().enumerate() {
                    m.submit_shard_model(PeerId(peer as u64 % 4), records[i].clone(), true)
                        .unwrap();
                }
                assert_eq!(m.winner(ShardId(2), 0), Some(expected));
            }
        }
    }
}
