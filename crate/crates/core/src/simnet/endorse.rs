use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::event::{EventQueue, SimEventKind};
use super::Result;
use crate::defenses::PolicyVerdict;
use crate::ledger::{CommitStatus, ContentHash, EndorsementRecord, PeerId, ShardLedger, TxId};

/// Endorser cost model: each evaluation takes `service_time` plus uniform
/// jitter in `[0, jitter)` of one peer's serial capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceModel {
    pub service_time: f64,
    pub jitter: f64,
}

/// A transaction already in the ledger's pending pool, arriving at the
/// committee at `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Submission {
    pub tx: TxId,
    pub time: f64,
    pub update_hash: ContentHash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxOutcome {
    Committed,
    Rejected,
    TimedOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxResult {
    pub tx: TxId,
    pub submit_time: f64,
    pub end_time: f64,
    pub outcome: TxOutcome,
}

impl TxResult {
    pub fn latency(&self) -> f64 {
        self.end_time - self.submit_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: SimEventKind,
    pub tx: TxId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndorsementRun {
    /// One result per submission, in submission order.
    pub results: Vec<TxResult>,
    pub evaluations: u64,
    pub evaluations_by_peer: BTreeMap<PeerId, u64>,
    /// Latest terminal event (the start time if nothing was submitted).
    pub finish_time: f64,
    pub trace: Vec<TraceEvent>,
}

enum Ev {
    Submit(usize),
    Done {
        peer: PeerId,
        idx: usize,
        verdict: PolicyVerdict,
    },
    Timeout(usize),
}

#[derive(Default)]
struct PeerQueue {
    queue: VecDeque<usize>,
    busy: bool,
}

/// Runs the endorsement phase of one shard round as a discrete-event
/// simulation. Every committee member evaluates every submission in arrival
/// order on its own serial queue; `evaluate(peer, tx)` supplies the verdict.
/// A peer drops a queued request unevaluated once its deadline would pass
/// before the evaluation could finish.
pub fn run_endorsements<F>(
    ledger: &mut ShardLedger,
    submissions: &[Submission],
    service: ServiceModel,
    timeout: f64,
    start_time: f64,
    jitter_seed: u64,
    mut evaluate: F,
) -> Result<EndorsementRun>
where
    F: FnMut(PeerId, TxId) -> Result<PolicyVerdict>,
{
    let round = ledger.round();
    let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
    let mut events = EventQueue::new(start_time);
    for (i, s) in submissions.iter().enumerate() {
        events.schedule(s.time, Ev::Submit(i));
    }
    let mut peers: BTreeMap<PeerId, PeerQueue> = ledger
        .committee()
        .iter()
        .map(|p| (*p, PeerQueue::default()))
        .collect();
    let mut ends: Vec<Option<(f64, TxOutcome)>> = vec![None; submissions.len()];
    let mut evaluations_by_peer: BTreeMap<PeerId, u64> = BTreeMap::new();
    let mut trace = Vec::new();

    // Starts the next live request in `peer`'s queue, if any.
    let mut start_next = |peer: PeerId,
                          now: f64,
                          peers: &mut BTreeMap<PeerId, PeerQueue>,
                          ends: &[Option<(f64, TxOutcome)>],
                          events: &mut EventQueue<Ev>|
     -> Result<()> {
        let q = peers.get_mut(&peer).expect("committee member");
        q.busy = false;
        while let Some(idx) = q.queue.pop_front() {
            let hopeless = now + service.service_time >= submissions[idx].time + timeout;
            if matches!(ends[idx], Some((_, TxOutcome::TimedOut))) || hopeless {
                continue;
            }
            let verdict = evaluate(peer, submissions[idx].tx)?;
            *evaluations_by_peer.entry(peer).or_default() += 1;
            let mut duration = service.service_time;
            if service.jitter > 0.0 {
                duration += service.jitter * rng.random::<f64>();
            }
            events.schedule(now + duration, Ev::Done { peer, idx, verdict });
            q.busy = true;
            break;
        }
        Ok(())
    };

    while let Some(ev) = events.pop() {
        let now = ev.time;
        match ev.payload {
            Ev::Submit(idx) => {
                let s = &submissions[idx];
                trace.push(TraceEvent {
                    time: now,
                    kind: SimEventKind::Submit,
                    tx: s.tx,
                });
                events.schedule(now + timeout, Ev::Timeout(idx));
                let members: Vec<PeerId> = peers.keys().copied().collect();
                for peer in members {
                    let q = peers.get_mut(&peer).expect("member");
                    q.queue.push_back(idx);
                    if !q.busy {
                        start_next(peer, now, &mut peers, &ends, &mut events)?;
                    }
                }
            }
            Ev::Done { peer, idx, verdict } => {
                let s = &submissions[idx];
                trace.push(TraceEvent {
                    time: now,
                    kind: SimEventKind::EndorseDone,
                    tx: s.tx,
                });
                let status = ledger.record_endorsement_and_try_commit(EndorsementRecord {
                    tx_id: s.tx,
                    update_hash: s.update_hash,
                    peer_id: peer,
                    verdict,
                    round,
                })?;
                if ends[idx].is_none() {
                    let outcome = match status {
                        CommitStatus::Committed { .. } => Some(TxOutcome::Committed),
                        CommitStatus::Rejected => Some(TxOutcome::Rejected),
                        _ => None,
                    };
                    if let Some(o) = outcome {
                        ends[idx] = Some((now, o));
                        if o == TxOutcome::Committed {
                            trace.push(TraceEvent {
                                time: now,
                                kind: SimEventKind::Commit,
                                tx: s.tx,
                            });
                        }
                    }
                }
                start_next(peer, now, &mut peers, &ends, &mut events)?;
            }
            Ev::Timeout(idx) => {
                let s = &submissions[idx];
                if ledger.status(s.tx) == Some(CommitStatus::StillPending) {
                    ledger.expire(s.tx);
                    ends[idx] = Some((now, TxOutcome::TimedOut));
                    trace.push(TraceEvent {
                        time: now,
                        kind: SimEventKind::TimeoutFire,
                        tx: s.tx,
                    });
                }
            }
        }
    }

    let results = submissions
        .iter()
        .zip(ends)
        .map(|(s, end)| {
            let (end_time, outcome) = end.expect("every transaction terminates");
            TxResult {
                tx: s.tx,
                submit_time: s.time,
                end_time,
                outcome,
            }
        })
        .collect::<Vec<TxResult>>();
    let finish_time = results
        .iter()
        .map(|r| r.end_time)
        .fold(start_time, f64::max);
    Ok(EndorsementRun {
        results,
        evaluations: evaluations_by_peer.values().sum(),
        evaluations_by_peer,
        finish_time,
        trace,
    })
}
