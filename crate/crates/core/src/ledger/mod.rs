//! Off-chain model storage and on-chain bookkeeping.
//!
//! Model weights live in a content-addressed store keyed by SHA-256. Each
//! shard keeps its own hash-chained ledger of committed updates; the
//! mainchain records one shard model per (shard, round) and the resulting
//! global model.

mod cas;
mod chain;
mod codec;
mod hash;
mod mainchain;
mod shard;
mod types;

pub use cas::{cas_uri, parse_cas_uri, ContentStore, DiskStore, MemoryStore};
pub use chain::{verify_chain, Block, Chain, ChainCheck};
pub use codec::{decode_weights, encode_weights, CanonicalEncoder, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use hash::ContentHash;
pub use mainchain::{Mainchain, MainchainOutcome};
pub use shard::{CommitStatus, ShardLedger};
pub use types::{
    ClientId, EndorsementRecord, ModelUpdate, PeerId, ShardId, ShardModelRecord, Transaction, TxId,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("content {0} not found")]
    NotFound(ContentHash),
    #[error("integrity failure: stored bytes hash to {actual}, expected {expected}")]
    Integrity {
        expected: ContentHash,
        actual: ContentHash,
    },
    #[error("storage backend: {0}")]
    Storage(#[from] std::io::Error),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("stale round: update for round {got}, ledger at round {current}")]
    StaleRound { got: u64, current: u64 },
    #[error("update for future round {got}, ledger at round {current}")]
    FutureRound { got: u64, current: u64 },
    #[error("client {client} already submitted in round {round}")]
    DuplicateSubmission { client: ClientId, round: u64 },
    #[error("unknown transaction {0}")]
    UnknownTransaction(TxId),
    #[error("peer {0} is not a committee member")]
    NotCommitteeMember(PeerId),
    #[error("peer {peer} already endorsed transaction {tx}")]
    DoubleEndorsement { peer: PeerId, tx: TxId },
    #[error("submitter {peer} is not an endorsing peer of shard {shard} in round {round}")]
    NonEndorsingSubmitter {
        peer: PeerId,
        shard: ShardId,
        round: u64,
    },
    #[error("invalid committee: {0}")]
    InvalidCommittee(String),
}

pub type Result<T> = std::result::Result<T, LedgerError>;
