use std::collections::BTreeMap;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use super::{ContentHash, LedgerError, Result};

const URI_SCHEME: &str = "cas://";

pub fn cas_uri(h: &ContentHash) -> String {
    format!("{URI_SCHEME}{h}")
}

pub fn parse_cas_uri(uri: &str) -> Result<ContentHash> {
    uri.strip_prefix(URI_SCHEME)
        .ok_or_else(|| LedgerError::Malformed(format!("not a cas uri: {uri:?}")))?
        .parse()
}

/// Content-addressed byte store. `put` is idempotent; `get_verified`
/// re-hashes what it reads and reports tampering distinctly from absence.
pub trait ContentStore {
    fn put(&mut self, bytes: &[u8]) -> Result<ContentHash>;
    fn get_verified(&self, h: &ContentHash) -> Result<Vec<u8>>;
    fn contains(&self, h: &ContentHash) -> bool;
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn verify(expected: &ContentHash, bytes: Vec<u8>) -> Result<Vec<u8>> {
    let actual = ContentHash::of(&bytes);
    if actual == *expected {
        Ok(bytes)
    } else {
        Err(LedgerError::Integrity {
            expected: *expected,
            actual,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct MemoryStore {
    entries: BTreeMap<ContentHash, Vec<u8>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Out-of-band access to stored bytes, bypassing content addressing.
    /// Exists to model a misbehaving storage host.
    pub fn raw_mut(&mut self, h: &ContentHash) -> Option<&mut Vec<u8>> {
        self.entries.get_mut(h)
    }
}

impl ContentStore for MemoryStore {
    fn put(&mut self, bytes: &[u8]) -> Result<ContentHash> {
        let h = ContentHash::of(bytes);
        self.entries.entry(h).or_insert_with(|| bytes.to_vec());
        Ok(h)
    }

    fn get_verified(&self, h: &ContentHash) -> Result<Vec<u8>> {
        let bytes = self.entries.get(h).ok_or(LedgerError::NotFound(*h))?;
        verify(h, bytes.clone())
    }

    fn contains(&self, h: &ContentHash) -> bool {
        self.entries.contains_key(h)
    }

    fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Directory layout: `<root>/<first two hex chars>/<full hex>`.
#[derive(Debug, Clone)]
pub struct DiskStore {
    root: PathBuf,
}

impl DiskStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, h: &ContentHash) -> PathBuf {
        let hex = h.to_hex();
        self.root.join(&hex[..2]).join(hex)
    }
}

impl ContentStore for DiskStore {
    fn put(&mut self, bytes: &[u8]) -> Result<ContentHash> {
        let h = ContentHash::of(bytes);
        let path = self.path_for(&h);
        if path.exists() {
            return Ok(h);
        }
        let dir = path.parent().expect("hash path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{}.tmp", h.to_hex()));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        Ok(h)
    }

    fn get_verified(&self, h: &ContentHash) -> Result<Vec<u8>> {
        match fs::read(self.path_for(h)) {
            Ok(bytes) => verify(h, bytes),
            Err(e) if e.kind() == ErrorKind::NotFound => Err(LedgerError::NotFound(*h)),
            Err(e) => Err(e.into()),
        }
    }

    fn contains(&self, h: &ContentHash) -> bool {
        self.path_for(h).is_file()
    }

    fn len(&self) -> usize {
        let Ok(dirs) = fs::read_dir(&self.root) else {
            return 0;
        };
        dirs.flatten()
            .filter(|d| d.path().is_dir())
            .filter_map(|d| fs::read_dir(d.path()).ok())
            .map(|files| {
                files
                    .flatten()
                    .filter(|f| !f.file_name().to_string_lossy().starts_with('.'))
                    .count()
            })
            .sum()
    }
}
