use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::codec::{CanonicalDecoder, CanonicalEncoder};
use super::{ContentHash, LedgerError, Result, Transaction};

const BLOCK_DOMAIN: &[u8; 4] = b"SFLB";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub prev_hash: ContentHash,
    pub payload: Vec<Transaction>,
    pub block_hash: ContentHash,
}

impl Block {
    fn seal(height: u64, prev_hash: ContentHash, payload: Vec<Transaction>) -> Self {
        let block_hash = Self::compute_hash(height, &prev_hash, &payload);
        Self {
            height,
            prev_hash,
            payload,
            block_hash,
        }
    }

    /// `sha256("SFLB" | height | prev_hash | canonical payload)`.
    pub fn compute_hash(
        height: u64,
        prev_hash: &ContentHash,
        payload: &[Transaction],
    ) -> ContentHash {
        let mut e = CanonicalEncoder::new();
        e.raw(BLOCK_DOMAIN).u64(height).raw(prev_hash.as_bytes());
        encode_payload(&mut e, payload);
        ContentHash::of(&e.finish())
    }

    /// Canonical storage form: the hash preimage fields followed by the
    /// stored block hash.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = CanonicalEncoder::new();
        e.u64(self.height).raw(self.prev_hash.as_bytes());
        encode_payload(&mut e, &self.payload);
        e.raw(self.block_hash.as_bytes());
        e.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut d = CanonicalDecoder::new(bytes);
        let height = d.u64()?;
        let prev_hash = ContentHash(d.array32()?);
        let n = d.u64()?;
        let payload = (0..n)
            .map(|_| {
                let body = d.bytes()?;
                let mut inner = CanonicalDecoder::new(body);
                let tx = Transaction::decode(&mut inner)?;
                inner.finish()?;
                Ok(tx)
            })
            .collect::<Result<Vec<_>>>()?;
        let block_hash = ContentHash(d.array32()?);
        d.finish()?;
        Ok(Self {
            height,
            prev_hash,
            payload,
            block_hash,
        })
    }
}

fn encode_payload(e: &mut CanonicalEncoder, payload: &[Transaction]) {
    e.u64(payload.len() as u64);
    for tx in payload {
        let mut inner = CanonicalEncoder::new();
        tx.encode(&mut inner);
        e.bytes(&inner.finish());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainCheck {
    Ok,
    CorruptAt(u64),
}

/// Append-only hash chain starting from an empty genesis block.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    blocks: Vec<Block>,
}

impl Default for Chain {
    fn default() -> Self {
        Self::new()
    }
}

impl Chain {
    pub fn new() -> Self {
        Self {
            blocks: vec![Block::seal(0, ContentHash::ZERO, Vec::new())],
        }
    }

    /// Wraps blocks loaded from storage. Nothing is checked; call
    /// [`Chain::verify`].
    pub fn from_blocks(blocks: Vec<Block>) -> Self {
        Self { blocks }
    }

    pub fn append(&mut self, payload: Vec<Transaction>) -> &Block {
        let tip = self.tip();
        let block = Block::seal(tip.height + 1, tip.block_hash, payload);
        self.blocks.push(block);
        self.tip()
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("chain always has genesis")
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.blocks.iter().flat_map(|b| b.payload.iter())
    }

    pub fn verify(&self) -> ChainCheck {
        verify_chain(&self.blocks)
    }

    /// One JSON object per line, one line per block.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for b in &self.blocks {
            let line =
                serde_json::to_string(b).map_err(|e| LedgerError::Malformed(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parses a JSON-lines dump. A line that fails to parse is reported as
    /// corruption at that line's position rather than as an error.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<(Chain, ChainCheck)> {
        let mut blocks = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Block>(&line) {
                Ok(b) => blocks.push(b),
                Err(_) => {
                    let chain = Chain::from_blocks(blocks);
                    return Ok((chain, ChainCheck::CorruptAt(i as u64)));
                }
            }
        }
        let chain = Chain::from_blocks(blocks);
        let check = chain.verify();
        Ok((chain, check))
    }
}

/// Recomputes every block hash and prev-hash link; reports the first height
/// at which anything is inconsistent.
pub fn verify_chain(blocks: &[Block]) -> ChainCheck {
    let mut prev = ContentHash::ZERO;
    for (i, b) in blocks.iter().enumerate() {
        let i = i as u64;
        if b.height != i
            || b.prev_hash != prev
            || Block::compute_hash(b.height, &b.prev_hash, &b.payload) != b.block_hash
        {
            return ChainCheck::CorruptAt(i);
        }
        prev = b.block_hash;
    }
    ChainCheck::Ok
}
