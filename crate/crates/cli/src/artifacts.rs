//! Output files and the run manifest.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Tracks the files a command writes under its output directory.
#[derive(Debug)]
pub struct ArtifactSet {
    root: PathBuf,
    files: Vec<String>,
}

impl ArtifactSet {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates `rel` (with parent directories) and hands a buffered writer
    /// to `write`.
    pub fn write<F>(&mut self, rel: &str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(File::create(&path)?);
        write(&mut out)?;
        out.flush()?;
        self.files.push(rel.to_owned());
        Ok(())
    }

    /// Writes `rows` as CSV (header from the field names) or JSON lines.
    pub fn write_rows<T: Serialize>(
        &mut self,
        stem: &str,
        format: OutputFormat,
        rows: &[T],
    ) -> Result<String, CliError> {
        let rel = format!("{stem}.{}", format.extension());
        self.write(&rel, |out| write_rows(out, format, rows))?;
        Ok(rel)
    }

    /// Writes `manifest.json` listing every artifact with its SHA-256.
    pub fn finish(
        mut self,
        command: &str,
        config: &ExperimentConfig,
        extra: BTreeMap<String, String>,
    ) -> Result<PathBuf, CliError> {
        self.files.sort();
        self.files.dedup();
        let mut artifacts = BTreeMap::new();
        for rel in &self.files {
            artifacts.insert(rel.clone(), file_sha256(&self.root.join(rel))?);
        }
        let manifest = Manifest {
            command,
            seed: config.task.seed,
            config_sha256: config_hash(config)?,
            artifacts,
            extra,
        };
        let path = self.root.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    config_sha256: String,
    artifacts: BTreeMap<String, String>,
    #[serde(flatten)]
    extra: BTreeMap<String, String>,
}

pub fn write_rows<W: Write, T: Serialize>(
    out: W,
    format: OutputFormat,
    rows: &[T],
) -> Result<(), CliError> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::Jsonl => {
            let mut out = out;
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Hash of the effective config. The output directory is left out so the
/// same experiment written to two places has the same manifest.
pub fn config_hash(config: &ExperimentConfig) -> Result<String, CliError> {
    let mut c = config.clone();
    c.output_dir = PathBuf::new();
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&c)?)))
}
