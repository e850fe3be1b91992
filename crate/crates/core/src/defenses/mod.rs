//! Acceptance policies evaluated by endorsing peers, plus PN-sequence
//! commitments for detecting copied ("lazy") updates.
//!
//! Single-update checks ([`norm_bound_check`], [`roni_check`],
//! [`pn_correlate`]) are plain functions. Cohort-level defences
//! ([`multi_krum_select`], [`fools_gold_weights`]) look at every update
//! submitted to a shard in a round; [`PolicyChain`] precomputes those once per
//! round and then answers per-update, per-peer queries.

mod chain;
mod foolsgold;
mod krum;
mod pn;
mod simple;

pub use chain::{Candidate, FoolsGoldHistory, PolicyChain, PolicyConfig, PreparedRound};
pub use foolsgold::{fools_gold_weights, FoolsGoldWeights};
pub use krum::{krum_scores, multi_krum_select};
pub use pn::{pn_commit, pn_correlate, pn_sequence, pn_strip, PnCommitment};
pub use simple::{norm_bound_check, roni_check};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fl::FlError;

/// Default PN correlation acceptance threshold.
pub const DEFAULT_PN_THRESHOLD: f64 = 0.2;
/// Default RONI tolerated accuracy drop.
pub const DEFAULT_RONI_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyVerdict {
    pub decision: Decision,
    /// Policy-specific diagnostic (a norm, an accuracy delta, a weight...).
    pub score: f64,
    /// Short reason code; `"ok"` on accept.
    pub reason: String,
}

impl PolicyVerdict {
    pub fn accept(score: f64) -> Self {
        Self {
            decision: Decision::Accept,
            score,
            reason: "ok".to_owned(),
        }
    }

    pub fn reject(score: f64, reason: impl Into<String>) -> Self {
        let reason = reason.into();
        debug_assert!(!reason.is_empty());
        Self {
            decision: Decision::Reject,
            score,
            reason,
        }
    }

    pub fn is_accept(&self) -> bool {
        self.decision == Decision::Accept
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DefenseError {
    #[error(transparent)]
    Fl(#[from] FlError),
    #[error("multi-krum needs n >= f + 3 and 1 <= m <= n - f; got n={n}, f={f}, m={m}")]
    KrumParams { n: usize, f: usize, m: usize },
    #[error("foolsgold needs at least two clients, got {0}")]
    TooFewClients(usize),
    #[error("invalid policy parameter: {0}")]
    InvalidParam(String),
    #[error("candidate index {0} out of range")]
    UnknownCandidate(usize),
}

pub type Result<T> = std::result::Result<T, DefenseError>;
