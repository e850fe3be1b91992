use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scalesfl_cli::bench::{run_bench, BenchArgs};
use scalesfl_cli::train::run_training;
use scalesfl_cli::verify::verify_ledger;
use scalesfl_cli::{load_config, CliError, OutputFormat, Overrides};
use scalesfl_core::bench::SweepAxis;
use scalesfl_core::ledger::ChainCheck;

// Like println!, but a closed stdout (e.g. piped into `head`) is not fatal.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// Sharded federated learning simulator.
#[derive(Parser)]
#[command(name = "scalesfl", version)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `task.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `format` (csv or jsonl).
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the federated rounds and write per-round metrics.
    Train,
    /// Like `train`, with the adversary roster required and per-submission
    /// outcomes written.
    Attack,
    /// Run a throughput/latency sweep.
    Bench {
        /// shards, send-rate, total-tx or workers.
        #[arg(long)]
        axis: Option<SweepAxis>,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Also write every transaction record.
        #[arg(long)]
        records: bool,
    },
    /// Check exported ledgers, CAS references and the manifest.
    VerifyLedger {
        /// Run directory or ledger file; defaults to the output directory.
        path: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        format: cli.format,
    };
    let config = || {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config is required".into()))?;
        load_config(path, &overrides)
    };
    match cli.command {
        Command::Train | Command::Attack => {
            let attack = matches!(cli.command, Command::Attack);
            let loaded = config()?;
            let summary = run_training(&loaded, attack)?;
            if let Some(last) = summary.rows.last() {
                say!(
                    "{} rounds, final test accuracy {:.4}, model {}",
                    summary.rows.len(),
                    last.test_accuracy,
                    summary.final_model_hash
                );
            }
            say!("wrote {}", loaded.output_dir().display());
        }
        Command::Bench {
            axis,
            values,
            records,
        } => {
            let loaded = config()?;
            let rows = run_bench(
                &loaded,
                &BenchArgs {
                    axis,
                    values,
                    records,
                },
            )?;
            for r in &rows {
                match &r.result {
                    Ok(m) => say!(
                        "{:>8}: {:.3} TPS, {} ok, {} failed",
                        r.axis_value,
                        m.throughput_tps,
                        m.succeeded,
                        m.failed
                    ),
                    Err(e) => say!("{:>8}: error: {e}", r.axis_value),
                }
            }
            say!("wrote {}", loaded.output_dir().display());
        }
        Command::VerifyLedger { ref path } => {
            let target = match (path, &cli.out, &cli.config) {
                (Some(p), _, _) => p.clone(),
                (None, Some(o), _) => o.clone(),
                (None, None, Some(_)) => config()?.config.output_dir,
                (None, None, None) => {
                    return Err(CliError::Config(
                        "verify-ledger needs a path, --out or --config".into(),
                    ))
                }
            };
            let report = verify_ledger(&target)?;
            for l in &report.ledgers {
                let status = match l.check {
                    ChainCheck::Ok => "ok".to_owned(),
                    ChainCheck::CorruptAt(h) => format!("corrupt at height {h}"),
                };
                say!("{}: {} blocks, {status}", l.path.display(), l.blocks);
                for r in &l.bad_references {
                    say!("  bad CAS reference {r}");
                }
            }
            for a in &report.bad_artifacts {
                say!("manifest mismatch: {a}");
            }
            if !report.is_ok() {
                return Err(CliError::Invariant("ledger verification failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
