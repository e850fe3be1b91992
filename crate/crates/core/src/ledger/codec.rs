//! Bit-exact binary encodings: the weight-vector payload stored in the CAS,
//! and the length-prefixed canonical encoding used as hash preimage for
//! ledger transactions and blocks.

use super::{LedgerError, Result};
use crate::fl::WeightVector;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"SFLW";
pub const WEIGHTS_VERSION: u8 = 1;

/// `"SFLW" | version u8 | dim u64 LE | dim x f64 LE`.
pub fn encode_weights(w: &WeightVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * w.dim());
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.push(WEIGHTS_VERSION);
    out.extend_from_slice(&(w.dim() as u64).to_le_bytes());
    for v in w.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_weights(bytes: &[u8]) -> Result<WeightVector> {
    let malformed = |msg: &str| LedgerError::Malformed(format!("weights payload: {msg}"));
    if bytes.len() < 13 || &bytes[..4] != WEIGHTS_MAGIC {
        return Err(malformed("bad magic"));
    }
    if bytes[4] != WEIGHTS_VERSION {
        return Err(malformed(&format!("unsupported version {}", bytes[4])));
    }
    let dim = u64::from_le_bytes(bytes[5..13].try_into().expect("8 bytes"));
    let body = &bytes[13..];
    if (body.len() as u64) != dim.saturating_mul(8) {
        return Err(malformed(&format!(
            "dim {dim} but {} value bytes",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    WeightVector::new(values).map_err(|e| malformed(&e.to_string()))
}

/// Field-order-fixed, length-prefixed binary writer.
#[derive(Debug, Default)]
pub struct CanonicalEncoder {
    buf: Vec<u8>,
}

impl CanonicalEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.u64(v.to_bits())
    }

    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.u64(v.len() as u64);
        self.buf.extend_from_slice(v);
        self
    }

    pub fn str(&mut self, v: &str) -> &mut Self {
        self.bytes(v.as_bytes())
    }

    pub fn raw(&mut self, v: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(v);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Reader for [`CanonicalEncoder`] output.
#[derive(Debug)]
pub(crate) struct CanonicalDecoder<'a> {
    buf: &'a [u8],
}

impl<'a> CanonicalDecoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(LedgerError::Malformed(
                "truncated canonical encoding".into(),
            ));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let len = self.u64()?;
        let len = usize::try_from(len)
            .map_err(|_| LedgerError::Malformed("length prefix overflow".into()))?;
        self.take(len)
    }

    pub fn str(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?.to_vec())
            .map_err(|_| LedgerError::Malformed("invalid utf-8".into()))
    }

    pub fn array32(&mut self) -> Result<[u8; 32]> {
        Ok(self.take(32)?.try_into().expect("32 bytes"))
    }

    pub fn finish(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(LedgerError::Malformed(format!(
                "{} trailing bytes",
                self.buf.len()
            )))
        }
    }
}
