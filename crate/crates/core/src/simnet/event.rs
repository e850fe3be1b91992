use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimEventKind {
    Submit,
    EndorseDone,
    Commit,
    ShardAggregate,
    MainchainCommit,
    TimeoutFire,
}

/// A scheduled item. Ordered by time, then by insertion sequence.
#[derive(Debug, Clone)]
pub struct SimEvent<T> {
    pub time: f64,
    pub seq: u64,
    pub payload: T,
}

impl<T> PartialEq for SimEvent<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for SimEvent<T> {}

impl<T> PartialOrd for SimEvent<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for SimEvent<T> {
    // Reversed: BinaryHeap is a max-heap and we pop the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Discrete-event queue with a monotone clock. Events at equal times pop in
/// insertion order.
#[derive(Debug)]
pub struct EventQueue<T> {
    heap: BinaryHeap<SimEvent<T>>,
    next_seq: u64,
    now: f64,
}

impl<T> EventQueue<T> {
    pub fn new(start: f64) -> Self {
        Self {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: start,
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Schedules `payload` at `time`, which must not be in the past.
    pub fn schedule(&mut self, time: f64, payload: T) {
        assert!(
            time >= self.now && time.is_finite(),
            "event at {time} scheduled before current time {}",
            self.now
        );
        self.heap.push(SimEvent {
            time,
            seq: self.next_seq,
            payload,
        });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<SimEvent<T>> {
        let ev = self.heap.pop()?;
        self.now = ev.time;
        Some(ev)
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
