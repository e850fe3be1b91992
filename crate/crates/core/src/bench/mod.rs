//! Fixed-rate transaction workloads against the shard endorsement path, and
//! throughput/latency/failure summaries.
//!
//! Every benchmark transaction is a real model update: random weights are
//! encoded, stored in the CAS, submitted to a shard ledger and endorsed by
//! the shard's committee after fetching and hash-checking the payload.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defenses::PolicyVerdict;
use crate::fl::WeightVector;
use crate::ledger::{
    cas_uri, encode_weights, parse_cas_uri, ClientId, ContentHash, ContentStore, LedgerError,
    MemoryStore, ModelUpdate, PeerId, ShardId, ShardLedger,
};
use crate::simnet::{
    derive_seed, elect_committee, run_endorsements, ServiceModel, SimError, Submission, TaskSpec,
    TxOutcome,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("no transaction records to summarize")]
    EmptyRecords,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// Offered load. Either a fixed rate, or a multiple of the deployment's
/// analytic endorsement capacity (`shards / service_time`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SendRate {
    Fixed(f64),
    Relative { capacity_multiple: f64 },
}

impl SendRate {
    pub fn resolve(&self, capacity_tps: f64) -> f64 {
        match *self {
            SendRate::Fixed(r) => r,
            SendRate::Relative { capacity_multiple } => capacity_multiple * capacity_tps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    #[serde(default = "default_total_tx")]
    pub total_tx: usize,
    pub send_rate: SendRate,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_shards")]
    pub shards: usize,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    /// Parameters per benchmark model update.
    #[serde(default = "default_model_dim")]
    pub model_dim: usize,
}

fn default_total_tx() -> usize {
    200
}

fn default_workers() -> usize {
    2
}

fn default_shards() -> usize {
    1
}

fn default_timeout() -> f64 {
    30.0
}

fn default_model_dim() -> usize {
    7850
}

impl WorkloadSpec {
    pub fn new(send_rate: f64) -> Self {
        Self {
            total_tx: default_total_tx(),
            send_rate: SendRate::Fixed(send_rate),
            workers: default_workers(),
            shards: default_shards(),
            timeout: default_timeout(),
            model_dim: default_model_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::InvalidWorkload(m));
        if self.total_tx == 0 {
            return bad("total_tx must be at least 1".into());
        }
        if self.workers == 0 || self.shards == 0 || self.model_dim == 0 {
            return bad("workers, shards and model_dim must be positive".into());
        }
        let rate = match self.send_rate {
            SendRate::Fixed(r) => r,
            SendRate::Relative { capacity_multiple } => capacity_multiple,
        };
        if !(rate > 0.0 && rate.is_finite()) {
            return bad(format!("send_rate must be positive, got {rate}"));
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return bad(format!("timeout must be positive, got {}", self.timeout));
        }
        Ok(())
    }
}

/// Committee behaviour of each benchmarked shard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndorsementParams {
    pub service_time: f64,
    pub jitter: f64,
    pub committee_size: usize,
    pub quorum: usize,
}

impl EndorsementParams {
    pub fn serial(service_time: f64) -> Self {
        Self {
            service_time,
            jitter: 0.0,
            committee_size: 1,
            quorum: 1,
        }
    }

    pub fn from_task(task: &TaskSpec) -> Self {
        Self {
            service_time: task.eval_service_time,
            jitter: task.eval_jitter,
            committee_size: task.committee_size,
            quorum: task.quorum(),
        }
    }

    /// Transactions per second one shard can endorse.
    pub fn shard_capacity(&self) -> f64 {
        1.0 / (self.service_time + self.jitter / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTx {
    pub index: usize,
    pub submit_time: f64,
    pub worker: usize,
    pub shard_id: ShardId,
}

/// Submissions at a constant inter-arrival of `1 / rate`, tagged with
/// workers and shards round-robin.
pub fn generate_workload(ws: &WorkloadSpec, rate: f64) -> Vec<ScheduledTx> {
    (0..ws.total_tx)
        .map(|i| ScheduledTx {
            index: i,
            submit_time: i as f64 / rate,
            worker: i % ws.workers,
            shard_id: ShardId((i % ws.shards) as u32),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchOutcome {
    Success,
    TimeoutFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxRecord {
    pub tx_id: u64,
    pub submit_time: f64,
    pub end_time: f64,
    pub outcome: BenchOutcome,
    pub shard_id: ShardId,
    pub worker: usize,
}

impl TxRecord {
    pub fn latency(&self) -> f64 {
        self.end_time - self.submit_time
    }
}

/// Runs `ws` against fresh shard ledgers and returns one record per
/// transaction, in submission order.
pub fn run_workload(ws: &WorkloadSpec, ep: &EndorsementParams, seed: u64) -> Result<Vec<TxRecord>> {
    ws.validate()?;
    if ep.committee_size == 0 || ep.quorum == 0 || ep.quorum > ep.committee_size {
        return Err(BenchError::InvalidWorkload(format!(
            "quorum {} with committee of {}",
            ep.quorum, ep.committee_size
        )));
    }
    let capacity = ws.shards as f64 * ep.shard_capacity();
    let rate = ws.send_rate.resolve(capacity);
    let schedule = generate_workload(ws, rate);
    let mut cas = MemoryStore::new();
    let mut records: Vec<Option<TxRecord>> = vec![None; schedule.len()];
    for shard in 0..ws.shards {
        let shard_id = ShardId(shard as u32);
        let mut ledger = ShardLedger::new(shard_id);
        let peers: Vec<PeerId> = (0..ep.committee_size as u64).map(PeerId).collect();
        let committee = elect_committee(
            &peers,
            ep.committee_size,
            0,
            derive_seed(seed, "shard", &[shard as u64]),
        )?;
        ledger.begin_round(0, committee, ep.quorum)?;
        let mut submissions = Vec::new();
        let mut owners = Vec::new();
        for tx in schedule.iter().filter(|t| t.shard_id == shard_id) {
            let weights = random_weights(
                ws.model_dim,
                derive_seed(seed, "bench-tx", &[tx.index as u64]),
            );
            let hash = cas.put(&encode_weights(&weights))?;
            let id = ledger.submit_update(ModelUpdate {
                task_id: "bench".into(),
                round: 0,
                shard_id,
                client_id: ClientId(tx.index as u64),
                weights_hash: hash,
                weights_uri: cas_uri(&hash),
                sample_count: 1,
                pn: None,
            })?;
            submissions.push(Submission {
                tx: id,
                time: tx.submit_time,
                update_hash: hash,
            });
            owners.push(*tx);
        }
        let uris: Vec<(String, ContentHash)> = submissions
            .iter()
            .map(|s| {
                let u = ledger.pending_update(s.tx).expect("pending");
                (u.weights_uri.clone(), u.weights_hash)
            })
            .collect();
        let index_of: std::collections::BTreeMap<_, _> = submissions
            .iter()
            .enumerate()
            .map(|(i, s)| (s.tx, i))
            .collect();
        let service = ServiceModel {
            service_time: ep.service_time,
            jitter: ep.jitter,
        };
        let run = run_endorsements(
            &mut ledger,
            &submissions,
            service,
            ws.timeout,
            0.0,
            derive_seed(seed, "bench-jitter", &[shard as u64]),
            |_, tx| {
                let (uri, claimed) = &uris[index_of[&tx]];
                let ok = parse_cas_uri(uri)
                    .and_then(|h| cas.get_verified(&h))
                    .map(|bytes| ContentHash::of(&bytes) == *claimed)
                    .unwrap_or(false);
                Ok(if ok {
                    PolicyVerdict::accept(0.0)
                } else {
                    PolicyVerdict::reject(0.0, "integrity_failure")
                })
            },
        )?;
        for (r, owner) in run.results.iter().zip(&owners) {
            let outcome = match r.outcome {
                TxOutcome::Committed => BenchOutcome::Success,
                TxOutcome::TimedOut => BenchOutcome::TimeoutFailure,
                TxOutcome::Rejected => {
                    return Err(BenchError::InvalidWorkload(format!(
                        "benchmark transaction {} failed verification",
                        owner.index
                    )))
                }
            };
            records[owner.index] = Some(TxRecord {
                tx_id: owner.index as u64,
                submit_time: r.submit_time,
                end_time: r.end_time,
                outcome,
                shard_id,
                worker: owner.worker,
            });
        }
    }
    Ok(records
        .into_iter()
        .map(|r| r.expect("every transaction ran"))
        .collect())
}

fn random_weights(dim: usize, seed: u64) -> WeightVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WeightVector::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("finite")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub sent: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub throughput_tps: f64,
    pub avg_latency_s: Option<f64>,
    pub min_latency_s: Option<f64>,
    pub max_latency_s: Option<f64>,
    pub avg_latency_incl_timeouts_s: f64,
}

/// From the first submission to the last terminal event.
pub fn observation_window(records: &[TxRecord]) -> f64 {
    let start = records
        .iter()
        .map(|r| r.submit_time)
        .fold(f64::INFINITY, f64::min);
    let end = records
        .iter()
        .map(|r| r.end_time)
        .fold(f64::NEG_INFINITY, f64::max);
    (end - start).max(0.0)
}

/// Throughput counts successes over `window` seconds.
pub fn summarize(records: &[TxRecord], window: f64) -> Result<RunMetrics> {
    if records.is_empty() {
        return Err(BenchError::EmptyRecords);
    }
    let ok: Vec<f64> = records
        .iter()
        .filter(|r| r.outcome == BenchOutcome::Success)
        .map(TxRecord::latency)
        .collect();
    let succeeded = ok.len();
    let (avg, min, max) = if ok.is_empty() {
        (None, None, None)
    } else {
        (
            Some(ok.iter().sum::<f64>() / succeeded as f64),
            Some(ok.iter().copied().fold(f64::INFINITY, f64::min)),
            Some(ok.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        )
    };
    let all = records.iter().map(TxRecord::latency).sum::<f64>() / records.len() as f64;
    Ok(RunMetrics {
        sent: records.len(),
        succeeded,
        failed: records.len() - succeeded,
        throughput_tps: if window > 0.0 {
            succeeded as f64 / window
        } else {
            0.0
        },
        avg_latency_s: avg,
        min_latency_s: min,
        max_latency_s: max,
        avg_latency_incl_timeouts_s: all,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Shards,
    SendRate,
    TotalTx,
    Workers,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "shards" => Ok(Self::Shards),
            "send_rate" => Ok(Self::SendRate),
            "total_tx" => Ok(Self::TotalTx),
            "workers" => Ok(Self::Workers),
            other => Err(format!("unknown sweep axis `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis_value: f64,
    /// The run's metrics, or the error that stopped it.
    pub result: std::result::Result<RunMetrics, String>,
    pub records: Vec<TxRecord>,
}

/// Applies one axis value to a copy of `base`.
pub fn apply_axis(base: &WorkloadSpec, axis: SweepAxis, value: f64) -> Result<WorkloadSpec> {
    let mut ws = base.clone();
    let count = || {
        if value >= 1.0 && value.fract() == 0.0 {
            Ok(value as usize)
        } else {
            Err(BenchError::InvalidWorkload(format!(
                "{axis:?} value {value} is not a positive integer"
            )))
        }
    };
    match axis {
        SweepAxis::Shards => ws.shards = count()?,
        SweepAxis::SendRate => ws.send_rate = SendRate::Fixed(value),
        SweepAxis::TotalTx => ws.total_tx = count()?,
        SweepAxis::Workers => ws.workers = count()?,
    }
    Ok(ws)
}

/// One run per value with every other parameter fixed. Failed runs are
/// recorded and the sweep continues.
pub fn sweep(
    axis: SweepAxis,
    values: &[f64],
    base: &WorkloadSpec,
    ep: &EndorsementParams,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(BenchError::InvalidWorkload(
            "sweep needs at least one value".into(),
        ));
    }
    Ok(values
        .iter()
        .map(|&v| {
            let run = apply_axis(base, axis, v).and_then(|ws| run_workload(&ws, ep, seed));
            match run {
                Ok(records) => SweepRow {
                    axis_value: v,
                    result: summarize(&records, observation_window(&records))
                        .map_err(|e| e.to_string()),
                    records,
                },
                Err(e) => SweepRow {
                    axis_value: v,
                    result: Err(e.to_string()),
                    records: Vec::new(),
                },
            }
        })
        .collect())
}

pub const CSV_COLUMNS: [&str; 9] = [
    "axis_value",
    "sent",
    "succeeded",
    "failed",
    "throughput_tps",
    "avg_latency_s",
    "min_latency_s",
    "max_latency_s",
    "avg_latency_incl_timeouts_s",
];

/// Writes the sweep table. Rows of failed runs keep only `axis_value`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in rows {
        let mut fields = vec![row.axis_value.to_string()];
        match &row.result {
            Ok(m) => fields.extend([
                m.sent.to_string(),
                m.succeeded.to_string(),
                m.failed.to_string(),
                m.throughput_tps.to_string(),
                opt(m.avg_latency_s),
                opt(m.min_latency_s),
                opt(m.max_latency_s),
                m.avg_latency_incl_timeouts_s.to_string(),
            ]),
            Err(_) => fields.extend(std::iter::repeat_n(String::new(), CSV_COLUMNS.len() - 1)),
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Raw transaction records of every run, one JSON object per line.
pub fn write_records_jsonl<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        axis_value: f64,
        #[serde(flatten)]
        record: &'a TxRecord,
    }
    for row in rows {
        for record in &row.records {
            serde_json::to_writer(
                &mut out,
                &Line {
                    axis_value: row.axis_value,
                    record,
                },
            )?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
