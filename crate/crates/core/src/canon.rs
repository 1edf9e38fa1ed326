//! Canonical byte encoding used for every hashed structure (layout digests,
//! trie-stored records, account and world commitments).
//!
//! The encoding is normative: integers are 32-byte big-endian words, byte
//! strings are a 32-byte big-endian length followed by the raw bytes, and
//! fields appear in the fixed order defined at each call site. Any two
//! implementations must agree byte-for-byte to agree on roots.

use thiserror::Error;

use crate::slots::WORD_BYTES;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonError {
    #[error("unexpected end of canonical input at byte {0}")]
    UnexpectedEnd(usize),
    #[error("canonical integer exceeds 64 bits")]
    IntegerOverflow,
    #[error("{0} trailing bytes after canonical value")]
    TrailingBytes(usize),
    #[error("invalid canonical tag {0}")]
    InvalidTag(u64),
    #[error("byte string length {0} exceeds input")]
    LengthOutOfRange(u64),
}

/// Append-only canonical encoder.
#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn uint(&mut self, v: u64) -> &mut Self {
        let mut word = [0u8; WORD_BYTES];
        word[24..].copy_from_slice(&v.to_be_bytes());
        self.buf.extend_from_slice(&word);
        self
    }

    pub fn word(&mut self, w: &[u8; WORD_BYTES]) -> &mut Self {
        self.buf.extend_from_slice(w);
        self
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.uint(b.len() as u64);
        self.buf.extend_from_slice(b);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Cursor over a canonical encoding.
pub struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CanonError> {
        if self.pos + n > self.data.len() {
            return Err(CanonError::UnexpectedEnd(self.pos));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn uint(&mut self) -> Result<u64, CanonError> {
        let word = self.take(WORD_BYTES)?;
        if word[..24].iter().any(|b| *b != 0) {
            return Err(CanonError::IntegerOverflow);
        }
        let mut low = [0u8; 8];
        low.copy_from_slice(&word[24..]);
        Ok(u64::from_be_bytes(low))
    }

    pub fn word(&mut self) -> Result<[u8; WORD_BYTES], CanonError> {
        let raw = self.take(WORD_BYTES)?;
        let mut out = [0u8; WORD_BYTES];
        out.copy_from_slice(raw);
        Ok(out)
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, CanonError> {
        let len = self.uint()?;
        if len > (self.data.len() - self.pos) as u64 {
            return Err(CanonError::LengthOutOfRange(len));
        }
        Ok(self.take(len as usize)?.to_vec())
    }

    pub fn expect_end(&self) -> Result<(), CanonError> {
        if self.pos != self.data.len() {
            return Err(CanonError::TrailingBytes(self.data.len() - self.pos));
        }
        Ok(())
    }
}
