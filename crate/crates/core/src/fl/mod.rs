//! Federated-learning numerics: local training, DP clipping, evaluation,
//! two-level weighted aggregation and dataset partitioning.
//!
//! Everything in here is a pure function of its inputs. Randomness is always
//! drawn from a seed passed in by the caller.

mod aggregate;
mod dataset;
mod model;
mod partition;
mod train;
mod weights;

pub use aggregate::{aggregate_global, aggregate_shard, weighted_mean, KahanSum};
pub use dataset::{Example, LabeledDataset, SyntheticTask};
pub use model::ModelSpec;
pub use partition::{partition_dataset, PartitionMode};
pub use train::{
    clip_to_norm, dp_clip_and_noise, evaluate, local_train, Hyperparams, LocalUpdateResult,
};
pub use weights::WeightVector;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("non-finite gradient in epoch {epoch}, batch {batch}")]
    NonFiniteGradient { epoch: usize, batch: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparams(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("cannot split {size} examples into {parts} partitions")]
    TooManyPartitions { size: usize, parts: usize },
    #[error("sample count must be positive")]
    ZeroSampleCount,
}

pub type Result<T> = std::result::Result<T, FlError>;
