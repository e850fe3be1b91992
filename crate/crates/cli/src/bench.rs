//! `bench`: throughput/latency sweeps over the endorsement path.

use std::collections::BTreeMap;

use serde::Serialize;

use scalesfl_core::bench::{
    sweep, write_records_jsonl, write_sweep_csv, BenchError, EndorsementParams, RunMetrics,
    SweepAxis, SweepRow,
};

use crate::artifacts::ArtifactSet;
use crate::config::{OutputFormat, SweepSpec};
use crate::{CliError, LoadedConfig};

#[derive(Debug, Clone, Default)]
pub struct BenchArgs {
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
    pub records: bool,
}

#[derive(Serialize)]
struct JsonRow<'a> {
    axis: SweepAxis,
    axis_value: f64,
    #[serde(flatten)]
    metrics: Option<&'a RunMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

/// Picks the sweep from the flags, else the config, else a single run.
fn resolve_sweep(
    loaded: &LoadedConfig,
    args: &BenchArgs,
    total_tx: usize,
) -> Result<SweepSpec, CliError> {
    match (args.axis, args.values.is_empty(), &loaded.config.sweep) {
        (Some(axis), false, _) => Ok(SweepSpec {
            axis,
            values: args.values.clone(),
        }),
        (Some(_), true, _) | (None, false, _) => Err(CliError::Config(
            "--axis and --values must be given together".into(),
        )),
        (None, true, Some(s)) => Ok(s.clone()),
        (None, true, None) => Ok(SweepSpec {
            axis: SweepAxis::TotalTx,
            values: vec![total_tx as f64],
        }),
    }
}

pub fn run_bench(loaded: &LoadedConfig, args: &BenchArgs) -> Result<Vec<SweepRow>, CliError> {
    let cfg = &loaded.config;
    let ws = cfg
        .workload
        .clone()
        .ok_or_else(|| CliError::Config("workload: bench needs a [workload] table".into()))?;
    let spec = resolve_sweep(loaded, args, ws.total_tx)?;
    let ep = EndorsementParams::from_task(&cfg.task);
    let rows = sweep(spec.axis, &spec.values, &ws, &ep, cfg.task.seed).map_err(|e| match e {
        BenchError::InvalidWorkload(m) => CliError::Config(format!("sweep: {m}")),
        other => CliError::Invariant(other.to_string()),
    })?;

    let mut out = ArtifactSet::new(loaded.output_dir())?;
    match cfg.format {
        OutputFormat::Csv => out.write("metrics.csv", |w| Ok(write_sweep_csv(&rows, w)?))?,
        OutputFormat::Jsonl => {
            let lines: Vec<JsonRow> = rows
                .iter()
                .map(|r| JsonRow {
                    axis: spec.axis,
                    axis_value: r.axis_value,
                    metrics: r.result.as_ref().ok(),
                    error: r.result.as_ref().err().map(String::as_str),
                })
                .collect();
            out.write_rows("metrics", OutputFormat::Jsonl, &lines)?;
        }
    }
    if args.records || cfg.write_records {
        out.write("records.jsonl", |w| Ok(write_records_jsonl(&rows, w)?))?;
    }
    let extra = BTreeMap::from([("sweep_axis".to_owned(), format!("{:?}", spec.axis))]);
    out.finish("bench", cfg, extra)?;
    Ok(rows)
}
