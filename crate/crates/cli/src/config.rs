//! Experiment configuration files.
//!
//! A config is one TOML document. Only `[task]` is required; everything else
//! has a default. Unknown keys anywhere are rejected.
//!
//! ```toml
//! dataset = "digits"          # or [dataset.synthetic] / dataset = { csv = "path" }
//! test_fraction = 0.2
//! validation_fraction = 0.1
//! format = "csv"              # or "jsonl"
//! output_dir = "out"
//!
//! [partition]
//! mode = "label_skew"
//! alpha = 0.5
//!
//! [task]
//! shard_count = 8
//! clients_per_shard = 8
//! committee_size = 4
//! rounds = 15
//! model = { kind = "logistic_regression", features = 64, classes = 10 }
//!
//! [[adversaries]]
//! clients = [0, 1]
//! behavior = { kind = "label_flip", fraction = 1.0 }
//!
//! [[compromised]]
//! shard = 2
//! round = 1
//!
//! [workload]
//! send_rate = { capacity_multiple = 1.1 }
//!
//! [sweep]
//! axis = "shards"
//! values = [1, 2, 4, 8]
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scalesfl_core::bench::{SweepAxis, WorkloadSpec};
use scalesfl_core::fl::{LabeledDataset, PartitionMode, SyntheticTask};
use scalesfl_core::simnet::{Adversary, TaskSpec};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    #[serde(default)]
    pub dataset: DatasetSource,
    /// Share of the dataset held out for test accuracy.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Share of the remaining training data given to peers for validation
    /// (used by RONI) instead of to clients.
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub partition: Option<PartitionMode>,
    #[serde(default)]
    pub adversaries: Vec<AdversaryGroup>,
    #[serde(default)]
    pub compromised: Vec<CompromisedShard>,
    #[serde(default)]
    pub workload: Option<WorkloadSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
    /// Also write raw bench transaction records as JSON lines.
    #[serde(default)]
    pub write_records: bool,
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_validation_fraction() -> f64 {
    0.1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// The bundled 8x8 handwritten digits (64 features, 10 classes).
    #[default]
    Digits,
    Synthetic(SyntheticTask),
    /// Header row, feature columns, integer label in the last column.
    Csv(PathBuf),
}

impl DatasetSource {
    /// Relative CSV paths resolve against `base`, the config's directory.
    pub fn load(&self, base: &Path, seed: u64) -> Result<LabeledDataset, CliError> {
        let data = match self {
            DatasetSource::Digits => Ok(LabeledDataset::digits()),
            DatasetSource::Synthetic(t) => t.generate(seed),
            DatasetSource::Csv(p) => LabeledDataset::from_csv_path(&base.join(p)),
        };
        data.map_err(|e| CliError::Config(format!("dataset: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryGroup {
    /// Global client ids; client `k` lives in shard `k / clients_per_shard`.
    pub clients: Vec<u64>,
    pub behavior: Adversary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompromisedShard {
    pub shard: u32,
    pub round: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Jsonl => "jsonl",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(format!("unknown format `{other}`, expected csv or jsonl")),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Semantic checks that parsing cannot express. Each message starts with
    /// the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.task
            .validate()
            .map_err(|e| CliError::Config(format!("task: {e}")))?;
        for (key, v) in [
            ("test_fraction", self.test_fraction),
            ("validation_fraction", self.validation_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{key}: must be in (0, 1), got {v}"));
            }
        }
        if let Some(PartitionMode::LabelSkew { alpha }) = self.partition {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return bad(format!("partition.alpha: must be positive, got {alpha}"));
            }
        }
        let client_count = (self.task.shard_count * self.task.clients_per_shard) as u64;
        let mut seen = BTreeSet::new();
        for g in &self.adversaries {
            g.behavior
                .validate()
                .map_err(|e| CliError::Config(format!("adversaries.behavior: {e}")))?;
            for &c in &g.clients {
                if c >= client_count {
                    return bad(format!(
                        "adversaries.clients: client {c} does not exist ({client_count} clients)"
                    ));
                }
                if !seen.insert(c) {
                    return bad(format!(
                        "adversaries.clients: client {c} listed more than once"
                    ));
                }
            }
        }
        for c in &self.compromised {
            if c.shard as usize >= self.task.shard_count {
                return bad(format!(
                    "compromised.shard: shard {} does not exist",
                    c.shard
                ));
            }
            if c.round >= self.task.rounds {
                return bad(format!(
                    "compromised.round: round {} is past the last round",
                    c.round
                ));
            }
        }
        if let Some(w) = &self.workload {
            w.validate()
                .map_err(|e| CliError::Config(format!("workload: {e}")))?;
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep.values: must not be empty".into());
            }
        }
        Ok(())
    }
}
