use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::foolsgold::fools_gold_weights;
use super::krum::multi_krum_select;
use super::pn::pn_correlate;
use super::simple::{norm_bound_check, roni_check};
use super::{DefenseError, PnCommitment, PolicyVerdict, Result};
use super::{DEFAULT_PN_THRESHOLD, DEFAULT_RONI_THRESHOLD};
use crate::fl::{LabeledDataset, ModelSpec, WeightVector};

/// One acceptance policy and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    AcceptAll,
    /// Bound on `|update - global|_2`.
    NormBound {
        max_norm: f64,
    },
    Roni {
        #[serde(default = "default_roni")]
        drop_threshold: f64,
    },
    /// `m` defaults to `n - f` for a cohort of `n` updates.
    MultiKrum {
        f: usize,
        #[serde(default)]
        m: Option<usize>,
    },
    FoolsGold {
        /// Updates whose FoolsGold weight falls below this are rejected.
        #[serde(default = "default_min_weight")]
        min_weight: f64,
        /// Fraction of coordinates, by largest global-model magnitude, used
        /// for similarity.
        #[serde(default = "default_top_fraction")]
        top_fraction: f64,
    },
    PnCorrelate {
        #[serde(default = "default_pn")]
        threshold: f64,
    },
}

fn default_roni() -> f64 {
    DEFAULT_RONI_THRESHOLD
}
fn default_min_weight() -> f64 {
    0.1
}
fn default_top_fraction() -> f64 {
    1.0
}
fn default_pn() -> f64 {
    DEFAULT_PN_THRESHOLD
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DefenseError::InvalidParam(msg));
        match *self {
            PolicyConfig::AcceptAll | PolicyConfig::MultiKrum { .. } => Ok(()),
            PolicyConfig::NormBound { max_norm } if max_norm.is_nan() || max_norm <= 0.0 => {
                bad(format!("norm_bound.max_norm {max_norm} must be > 0"))
            }
            PolicyConfig::Roni { drop_threshold } if drop_threshold.is_nan() || drop_threshold < 0.0 => {
                bad(format!("roni.drop_threshold {drop_threshold} must be >= 0"))
            }
            PolicyConfig::FoolsGold {
                min_weight,
                top_fraction,
            } if !(0.0..=1.0).contains(&min_weight) || !(top_fraction > 0.0 && top_fraction <= 1.0) => {
                bad(format!(
                    "fools_gold needs min_weight in [0,1] and top_fraction in (0,1]; got {min_weight}, {top_fraction}"
                ))
            }
            PolicyConfig::PnCorrelate { threshold } if !(threshold.is_finite()) => {
                bad(format!("pn_correlate.threshold {threshold} must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyConfig::AcceptAll => "accept_all",
            PolicyConfig::NormBound { .. } => "norm_bound",
            PolicyConfig::Roni { .. } => "roni",
            PolicyConfig::MultiKrum { .. } => "multi_krum",
            PolicyConfig::FoolsGold { .. } => "fools_gold",
            PolicyConfig::PnCorrelate { .. } => "pn_correlate",
        }
    }
}

/// An update as seen by the committee: decoded weights plus the submitter's
/// PN commitment, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub client_id: u64,
    pub weights: WeightVector,
    pub pn: Option<PnCommitment>,
}

/// Accumulated `update - global` deltas per client, owned by one shard
/// committee across rounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FoolsGoldHistory {
    accumulated: BTreeMap<u64, Vec<f64>>,
}

impl FoolsGoldHistory {
    pub fn record(&mut self, client_id: u64, delta: &WeightVector) {
        let entry = self
            .accumulated
            .entry(client_id)
            .or_insert_with(|| vec![0.0; delta.dim()]);
        for (a, d) in entry.iter_mut().zip(delta.as_slice()) {
            *a += d;
        }
    }

    /// The client's history with `delta` added, without recording it.
    pub fn with_delta(&self, client_id: u64, delta: &WeightVector) -> WeightVector {
        match self.accumulated.get(&client_id) {
            Some(acc) if acc.len() == delta.dim() => WeightVector::new(
                acc.iter()
                    .zip(delta.as_slice())
                    .map(|(a, d)| a + d)
                    .collect(),
            )
            .expect("finite history"),
            _ => delta.clone(),
        }
    }

    pub fn get(&self, client_id: u64) -> Option<&[f64]> {
        self.accumulated.get(&client_id).map(Vec::as_slice)
    }
}

/// Ordered list of policies; an update must pass every one (logical AND).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyChain {
    policies: Vec<PolicyConfig>,
}

impl PolicyChain {
    pub fn new(policies: Vec<PolicyConfig>) -> Result<Self> {
        for p in &policies {
            p.validate()?;
        }
        Ok(Self { policies })
    }

    pub fn policies(&self) -> &[PolicyConfig] {
        &self.policies
    }

    /// Runs the cohort-level parts of the chain (Multi-Krum selection,
    /// FoolsGold weights) for one round's candidates.
    pub fn prepare<'a>(
        &'a self,
        model: &'a ModelSpec,
        global: &'a WeightVector,
        candidates: &'a [Candidate],
        history: &FoolsGoldHistory,
    ) -> Result<PreparedRound<'a>> {
        let mut krum = None;
        let mut fools_gold = None;
        for policy in &self.policies {
            match *policy {
                PolicyConfig::MultiKrum { f, m } => {
                    let n = candidates.len();
                    let selected = if n >= f + 3 {
                        let m = m.unwrap_or(n - f).min(n - f);
                        let weights: Vec<WeightVector> =
                            candidates.iter().map(|c| c.weights.clone()).collect();
                        Some(multi_krum_select(&weights, f, m)?.into_iter().collect())
                    } else {
                        None
                    };
                    krum = Some(selected);
                }
                PolicyConfig::FoolsGold { top_fraction, .. } => {
                    fools_gold = Some(if candidates.len() >= 2 {
                        let histories = candidates
                            .iter()
                            .map(|c| Ok(history.with_delta(c.client_id, &c.weights.sub(global)?)))
                            .collect::<Result<Vec<_>>>()?;
                        let features = top_features(global, top_fraction);
                        Some(fools_gold_weights(&histories, features.as_deref())?.weights)
                    } else {
                        None
                    });
                }
                _ => {}
            }
        }
        Ok(PreparedRound {
            chain: self,
            model,
            global,
            candidates,
            krum,
            fools_gold,
        })
    }
}

/// Coordinates of the largest-magnitude `fraction` of global weights, or
/// `None` for all of them.
fn top_features(global: &WeightVector, fraction: f64) -> Option<Vec<usize>> {
    if fraction >= 1.0 {
        return None;
    }
    let keep = ((global.dim() as f64 * fraction).ceil() as usize).max(1);
    let mut idx: Vec<usize> = (0..global.dim()).collect();
    let g = global.as_slice();
    idx.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()).then(a.cmp(&b)));
    idx.truncate(keep);
    idx.sort_unstable();
    Some(idx)
}

/// A policy chain bound to one round's cohort.
#[derive(Debug)]
pub struct PreparedRound<'a> {
    chain: &'a PolicyChain,
    model: &'a ModelSpec,
    global: &'a WeightVector,
    candidates: &'a [Candidate],
    /// `Some(None)` when Multi-Krum is configured but the cohort is too small.
    krum: Option<Option<BTreeSet<usize>>>,
    fools_gold: Option<Option<Vec<f64>>>,
}

impl PreparedRound<'_> {
    /// Verdict for candidate `index`, as computed by a peer holding `heldout`.
    pub fn evaluate(&self, index: usize, heldout: &LabeledDataset) -> Result<PolicyVerdict> {
        let cand = self
            .candidates
            .get(index)
            .ok_or(DefenseError::UnknownCandidate(index))?;
        let mut last = PolicyVerdict::accept(0.0);
        for policy in self.chain.policies() {
            let verdict = match *policy {
                PolicyConfig::AcceptAll => PolicyVerdict::accept(0.0),
                PolicyConfig::NormBound { max_norm } => {
                    norm_bound_check(&cand.weights, self.global, max_norm)?
                }
                PolicyConfig::Roni { drop_threshold } => roni_check(
                    self.model,
                    &cand.weights,
                    self.global,
                    heldout,
                    drop_threshold,
                )?,
                PolicyConfig::MultiKrum { .. } => match &self.krum {
                    Some(Some(selected)) if selected.contains(&index) => PolicyVerdict::accept(1.0),
                    Some(Some(_)) => PolicyVerdict::reject(0.0, "krum_excluded"),
                    _ => PolicyVerdict::reject(0.0, "krum_cohort_too_small"),
                },
                PolicyConfig::FoolsGold { min_weight, .. } => match &self.fools_gold {
                    Some(Some(w)) if w[index] >= min_weight => PolicyVerdict::accept(w[index]),
                    Some(Some(w)) => PolicyVerdict::reject(w[index], "foolsgold_low_weight"),
                    // A lone update has nothing to be similar to.
                    _ => PolicyVerdict::accept(1.0),
                },
                PolicyConfig::PnCorrelate { threshold } => match &cand.pn {
                    Some(c) => pn_correlate(&cand.weights, self.global, c, threshold)?,
                    None => PolicyVerdict::reject(0.0, "missing_pn_commitment"),
                },
            };
            if !verdict.is_accept() {
                return Ok(verdict);
            }
            last = verdict;
        }
        Ok(last)
    }
}
