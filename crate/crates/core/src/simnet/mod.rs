//! Deterministic discrete-event simulation of a sharded deployment.
//!
//! Each round, every shard elects a committee, lets its clients train and
//! submit, runs the endorsement queues until every transaction commits, is
//! rejected or times out, and aggregates what was committed. Shard records
//! then go to the mainchain, which picks one per shard and publishes the
//! global model. Shards whose record loses restart from that global model.

mod committee;
mod endorse;
mod event;
mod network;
mod seeds;
mod shard;
mod task;

pub use committee::elect_committee;
pub use endorse::{
    run_endorsements, EndorsementRun, ServiceModel, Submission, TraceEvent, TxOutcome, TxResult,
};
pub use event::{EventQueue, SimEvent, SimEventKind};
pub use network::{count_evaluations, Network, RoundOutcome, ShardSummary};
pub use seeds::derive_seed;
pub use shard::{
    client_train_seed, shard_aggregate, RoundContext, ShardModel, ShardNode, ShardRoundReport,
    SubmissionSummary,
};
pub use task::{inject_adversary, Adversary, Participant, Role, TaskSpec};

use thiserror::Error;

use crate::defenses::DefenseError;
use crate::fl::FlError;
use crate::ledger::LedgerError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid task: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Fl(#[from] FlError),
    #[error(transparent)]
    Defense(#[from] DefenseError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

pub type Result<T> = std::result::Result<T, SimError>;
