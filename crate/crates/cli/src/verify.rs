//! `verify-ledger`: re-checks exported chains, CAS references and the
//! manifest of a previous run.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use scalesfl_core::ledger::{
    parse_cas_uri, Chain, ChainCheck, ContentHash, ContentStore, DiskStore, Transaction,
};

use crate::artifacts::{file_sha256, MANIFEST};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerReport {
    pub path: PathBuf,
    pub blocks: u64,
    pub check: ChainCheck,
    /// CAS objects referenced by this ledger that are missing or corrupt.
    pub bad_references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub ledgers: Vec<LedgerReport>,
    /// Manifest artifacts whose hash no longer matches.
    pub bad_artifacts: Vec<String>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.bad_artifacts.is_empty()
            && self
                .ledgers
                .iter()
                .all(|l| l.check == ChainCheck::Ok && l.bad_references.is_empty())
    }
}

/// `target` is a run directory, its `ledger/` directory, or one JSONL file.
pub fn verify_ledger(target: &Path) -> Result<VerifyReport, CliError> {
    let (files, run_dir) = if target.is_file() {
        (vec![target.to_path_buf()], None)
    } else if target.join("ledger").is_dir() {
        (jsonl_files(&target.join("ledger"))?, Some(target))
    } else if target.is_dir() {
        (jsonl_files(target)?, None)
    } else {
        return Err(CliError::Config(format!(
            "{}: no such file or directory",
            target.display()
        )));
    };
    if files.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no ledger files found",
            target.display()
        )));
    }
    let cas = run_dir
        .map(|d| d.join("cas"))
        .filter(|p| p.is_dir())
        .map(DiskStore::open)
        .transpose()
        .map_err(|e| CliError::Io(e.to_string()))?;

    let mut report = VerifyReport::default();
    for path in files {
        let (chain, check) = Chain::read_jsonl(BufReader::new(File::open(&path)?))
            .map_err(|e| CliError::Io(e.to_string()))?;
        let bad_references = match &cas {
            Some(store) => missing_objects(&chain, store),
            None => Vec::new(),
        };
        report.ledgers.push(LedgerReport {
            path,
            blocks: chain.blocks().len() as u64,
            check,
            bad_references,
        });
    }
    if let Some(dir) = run_dir {
        report.bad_artifacts = check_manifest(dir)?;
    }
    Ok(report)
}

fn jsonl_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

fn missing_objects(chain: &Chain, store: &DiskStore) -> Vec<String> {
    let check = |h: &ContentHash| store.get_verified(h).err().map(|e| format!("{h}: {e}"));
    chain
        .transactions()
        .filter_map(|tx| match tx {
            Transaction::Update { update, .. } => match parse_cas_uri(&update.weights_uri) {
                Ok(h) => check(&h),
                Err(e) => Some(format!("{}: {e}", update.weights_uri)),
            },
            Transaction::GlobalModel { model_hash, .. } => check(model_hash),
            Transaction::ShardModel { .. } => None,
        })
        .collect()
}

fn check_manifest(dir: &Path) -> Result<Vec<String>, CliError> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Ok(Vec::new());
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(&path)?)?;
    let Some(artifacts) = manifest.get("artifacts").and_then(|a| a.as_object()) else {
        return Ok(vec![format!("{MANIFEST}: no artifacts table")]);
    };
    let mut bad = Vec::new();
    for (rel, expected) in artifacts {
        let actual = file_sha256(&dir.join(rel)).ok();
        if actual.as_deref() != expected.as_str() {
            bad.push(rel.clone());
        }
    }
    Ok(bad)
}
