//! The slot-addressed storage space: 256-bit slot indices, 32-byte words,
//! and the sparse map that carries a contract's storage contents.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of bytes in one storage word.
pub const WORD_BYTES: usize = 32;

/// Index of one of the 2^256 storage slots. Big-endian byte order, so the
/// derived `Ord` is numeric order; arithmetic wraps modulo 2^256.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SlotKey(pub [u8; 32]);

impl SlotKey {
    pub const ZERO: SlotKey = SlotKey([0u8; 32]);

    pub fn from_u64(v: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[24..].copy_from_slice(&v.to_be_bytes());
        SlotKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// The slot index as a u64, when it fits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.0[..24].iter().any(|b| *b != 0) {
            return None;
        }
        let mut low = [0u8; 8];
        low.copy_from_slice(&self.0[24..]);
        Some(u64::from_be_bytes(low))
    }

    /// Slot index plus `n`, wrapping modulo 2^256.
    pub fn wrapping_add(&self, n: u128) -> Self {
        let mut out = self.0;
        let mut carry = n;
        for i in (0..32).rev() {
            if carry == 0 {
                break;
            }
            let sum = self.0[i] as u128 + (carry & 0xff);
            out[i] = (sum & 0xff) as u8;
            carry = (carry >> 8) + (sum >> 8);
        }
        SlotKey(out)
    }

    pub fn to_hex(&self) -> String {
        let trimmed: Vec<u8> = self.0.iter().copied().skip_while(|b| *b == 0).collect();
        if trimmed.is_empty() {
            "0x0".to_string()
        } else {
            let full = hex::encode(&trimmed);
            format!("0x{}", full.trim_start_matches('0'))
        }
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let stripped = s.strip_prefix("0x").unwrap_or(s);
        if stripped.is_empty() || stripped.len() > 64 {
            return Err(hex::FromHexError::InvalidStringLength);
        }
        let padded = if stripped.len() % 2 == 1 {
            format!("0{stripped}")
        } else {
            stripped.to_string()
        };
        let raw = hex::decode(&padded)?;
        let mut bytes = [0u8; 32];
        bytes[32 - raw.len()..].copy_from_slice(&raw);
        Ok(SlotKey(bytes))
    }
}

impl fmt::Debug for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SlotKey({})", self.to_hex())
    }
}

impl fmt::Display for SlotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl From<u64> for SlotKey {
    fn from(v: u64) -> Self {
        SlotKey::from_u64(v)
    }
}

impl Serialize for SlotKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for SlotKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        SlotKey::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// One 32-byte storage word. Byte 31 is the lowest-order byte.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SlotWord(pub [u8; 32]);

impl SlotWord {
    pub const ZERO: SlotWord = SlotWord([0u8; 32]);

    pub fn from_u64(v: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[24..].copy_from_slice(&v.to_be_bytes());
        SlotWord(bytes)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|b| *b == 0)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// The word as a u64, when the high 24 bytes are zero.
    pub fn to_u64(&self) -> Option<u64> {
        if self.0[..24].iter().any(|b| *b != 0) {
            return None;
        }
        let mut low = [0u8; 8];
        low.copy_from_slice(&self.0[24..]);
        Some(u64::from_be_bytes(low))
    }

    /// Bytes of the value occupying `width` bytes at byte offset `offset`
    /// from the low-order end, most-significant byte first.
    pub fn read_range(&self, offset: usize, width: usize) -> &[u8] {
        debug_assert!(offset + width <= WORD_BYTES);
        let hi = WORD_BYTES - offset;
        &self.0[hi - width..hi]
    }

    /// Overwrites the `bytes.len()`-byte range at byte offset `offset` from
    /// the low-order end.
    pub fn write_range(&mut self, offset: usize, bytes: &[u8]) {
        debug_assert!(offset + bytes.len() <= WORD_BYTES);
        let hi = WORD_BYTES - offset;
        self.0[hi - bytes.len()..hi].copy_from_slice(bytes);
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.0))
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let stripped = s.strip_prefix("0x").unwrap_or(s);
        let raw = hex::decode(stripped)?;
        if raw.len() != 32 {
            return Err(hex::FromHexError::InvalidStringLength);
        }
        let mut bytes = [0u8; 32];
        bytes.copy_from_slice(&raw);
        Ok(SlotWord(bytes))
    }
}

impl fmt::Debug for SlotWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SlotWord({})", self.to_hex())
    }
}

/// Sparse slot-to-word map. An all-zero word is never stored; reading an
/// absent slot yields zero. Iteration is by ascending slot index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StorageMap {
    entries: BTreeMap<SlotKey, SlotWord>,
}

impl StorageMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &SlotKey) -> SlotWord {
        self.entries.get(key).copied().unwrap_or(SlotWord::ZERO)
    }

    pub fn set(&mut self, key: SlotKey, word: SlotWord) {
        if word.is_zero() {
            self.entries.remove(&key);
        } else {
            self.entries.insert(key, word);
        }
    }

    pub fn occupied(&self, key: &SlotKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SlotKey, &SlotWord)> {
        self.entries.iter()
    }
}
