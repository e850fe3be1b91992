use std::fmt;

use serde::{Deserialize, Serialize};

use super::codec::{CanonicalDecoder, CanonicalEncoder};
use super::{ContentHash, LedgerError, Result};
use crate::defenses::{Decision, PnCommitment, PolicyVerdict};

macro_rules! id_type {
    ($name:ident, $inner:ty, $prefix:literal) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(ShardId, u32, "shard-");
id_type!(ClientId, u64, "client-");
id_type!(PeerId, u64, "peer-");
id_type!(TxId, u64, "tx-");

/// Metadata a client submits on-chain for one model update. The weights
/// themselves live in the CAS at `weights_uri`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelUpdate {
    pub task_id: String,
    pub round: u64,
    pub shard_id: ShardId,
    pub client_id: ClientId,
    pub weights_hash: ContentHash,
    pub weights_uri: String,
    pub sample_count: u64,
    pub pn: Option<PnCommitment>,
}

impl ModelUpdate {
    fn encode(&self, e: &mut CanonicalEncoder) {
        e.str(&self.task_id)
            .u64(self.round)
            .u64(u64::from(self.shard_id.0))
            .u64(self.client_id.0)
            .raw(self.weights_hash.as_bytes())
            .str(&self.weights_uri)
            .u64(self.sample_count);
        match &self.pn {
            None => {
                e.u8(0);
            }
            Some(c) => {
                e.u8(1).u64(c.seed).f64(c.sigma);
            }
        }
    }

    fn decode(d: &mut CanonicalDecoder<'_>) -> Result<Self> {
        let task_id = d.str()?;
        let round = d.u64()?;
        let shard_id = ShardId(
            u32::try_from(d.u64()?).map_err(|_| LedgerError::Malformed("shard id".into()))?,
        );
        let client_id = ClientId(d.u64()?);
        let weights_hash = ContentHash(d.array32()?);
        let weights_uri = d.str()?;
        let sample_count = d.u64()?;
        let pn = match d.u8()? {
            0 => None,
            1 => Some(PnCommitment {
                seed: d.u64()?,
                sigma: d.f64()?,
            }),
            t => return Err(LedgerError::Malformed(format!("pn tag {t}"))),
        };
        Ok(Self {
            task_id,
            round,
            shard_id,
            client_id,
            weights_hash,
            weights_uri,
            sample_count,
            pn,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndorsementRecord {
    pub tx_id: TxId,
    pub update_hash: ContentHash,
    pub peer_id: PeerId,
    pub verdict: PolicyVerdict,
    pub round: u64,
}

impl EndorsementRecord {
    fn encode(&self, e: &mut CanonicalEncoder) {
        e.u64(self.tx_id.0)
            .raw(self.update_hash.as_bytes())
            .u64(self.peer_id.0)
            .u8(match self.verdict.decision {
                Decision::Accept => 1,
                Decision::Reject => 0,
            })
            .f64(self.verdict.score)
            .str(&self.verdict.reason)
            .u64(self.round);
    }

    fn decode(d: &mut CanonicalDecoder<'_>) -> Result<Self> {
        let tx_id = TxId(d.u64()?);
        let update_hash = ContentHash(d.array32()?);
        let peer_id = PeerId(d.u64()?);
        let decision = match d.u8()? {
            1 => Decision::Accept,
            0 => Decision::Reject,
            t => return Err(LedgerError::Malformed(format!("decision tag {t}"))),
        };
        let score = d.f64()?;
        let reason = d.str()?;
        Ok(Self {
            tx_id,
            update_hash,
            peer_id,
            verdict: PolicyVerdict {
                decision,
                score,
                reason,
            },
            round: d.u64()?,
        })
    }
}

/// A shard's aggregated model for one round, as submitted to the mainchain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShardModelRecord {
    pub shard_id: ShardId,
    pub round: u64,
    pub model_hash: ContentHash,
    pub endorsement_count: u64,
    pub shard_sample_count: u64,
}

impl ShardModelRecord {
    fn encode(&self, e: &mut CanonicalEncoder) {
        e.u64(u64::from(self.shard_id.0))
            .u64(self.round)
            .raw(self.model_hash.as_bytes())
            .u64(self.endorsement_count)
            .u64(self.shard_sample_count);
    }

    fn decode(d: &mut CanonicalDecoder<'_>) -> Result<Self> {
        Ok(Self {
            shard_id: ShardId(
                u32::try_from(d.u64()?).map_err(|_| LedgerError::Malformed("shard id".into()))?,
            ),
            round: d.u64()?,
            model_hash: ContentHash(d.array32()?),
            endorsement_count: d.u64()?,
            shard_sample_count: d.u64()?,
        })
    }
}

/// A committed ledger entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Transaction {
    Update {
        tx_id: TxId,
        update: ModelUpdate,
        endorsements: Vec<EndorsementRecord>,
    },
    ShardModel {
        record: ShardModelRecord,
        submitter: PeerId,
    },
    GlobalModel {
        round: u64,
        model_hash: ContentHash,
        shards: Vec<ShardId>,
    },
}

impl Transaction {
    pub(crate) fn encode(&self, e: &mut CanonicalEncoder) {
        match self {
            Transaction::Update {
                tx_id,
                update,
                endorsements,
            } => {
                e.u8(1).u64(tx_id.0);
                update.encode(e);
                e.u64(endorsements.len() as u64);
                for r in endorsements {
                    r.encode(e);
                }
            }
            Transaction::ShardModel { record, submitter } => {
                e.u8(2);
                record.encode(e);
                e.u64(submitter.0);
            }
            Transaction::GlobalModel {
                round,
                model_hash,
                shards,
            } => {
                e.u8(3).u64(*round).raw(model_hash.as_bytes());
                e.u64(shards.len() as u64);
                for s in shards {
                    e.u64(u64::from(s.0));
                }
            }
        }
    }

    pub(crate) fn decode(d: &mut CanonicalDecoder<'_>) -> Result<Self> {
        match d.u8()? {
            1 => {
                let tx_id = TxId(d.u64()?);
                let update = ModelUpdate::decode(d)?;
                let n = d.u64()?;
                let endorsements = (0..n)
                    .map(|_| EndorsementRecord::decode(d))
                    .collect::<Result<_>>()?;
                Ok(Transaction::Update {
                    tx_id,
                    update,
                    endorsements,
                })
            }
            2 => Ok(Transaction::ShardModel {
                record: ShardModelRecord::decode(d)?,
                submitter: PeerId(d.u64()?),
            }),
            3 => {
                let round = d.u64()?;
                let model_hash = ContentHash(d.array32()?);
                let n = d.u64()?;
                let shards = (0..n)
                    .map(|_| {
                        u32::try_from(d.u64()?)
                            .map(ShardId)
                            .map_err(|_| LedgerError::Malformed("shard id".into()))
                    })
                    .collect::<Result<_>>()?;
                Ok(Transaction::GlobalModel {
                    round,
                    model_hash,
                    shards,
                })
            }
            t => Err(LedgerError::Malformed(format!("transaction tag {t}"))),
        }
    }
}
