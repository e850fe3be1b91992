//! Sharded federated learning coordinated through per-shard ledgers and a
//! mainchain, with pluggable acceptance policies for model updates.
//!
//! * [`fl`]: local training, DP clipping, evaluation, aggregation.
//! * [`defenses`]: acceptance policies run by endorsing peers.
//! * [`ledger`]: content-addressed model store, shard ledgers, mainchain.
//! * [`simnet`]: deterministic discrete-event simulation of the workflow.
//! * [`bench`]: workload generation and throughput/latency metrics.

pub mod bench;
pub mod defenses;
pub mod fl;
pub mod ledger;
pub mod simnet;
