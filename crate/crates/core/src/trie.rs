//! Authenticated key/value store: a binary radix trie over the keccak-256
//! of each logical key, with a deterministic, insertion-order-independent
//! root. Used for storage commitment and for the proposal and ballot tries
//! of contract accounts.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::hash::{keccak256, Digest};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrieError {
    #[error("empty values cannot be stored; delete the key instead")]
    EmptyValue,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Leaf {
    key: Vec<u8>,
    value: Vec<u8>,
}

/// Deterministic authenticated map.
///
/// Hashing scheme: leaf = keccak(0x00 || hashed_key || keccak(value));
/// internal node = keccak(0x01 || left || right); an absent child and the
/// empty trie hash to 32 zero bytes. Single-leaf subtrees collapse to the
/// leaf hash, so the root is a pure function of the key/value set.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuthTrie {
    entries: BTreeMap<[u8; 32], Leaf>,
}

impl AuthTrie {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, key: &[u8], value: &[u8]) -> Result<(), TrieError> {
        if value.is_empty() {
            return Err(TrieError::EmptyValue);
        }
        self.entries.insert(
            keccak256(key).0,
            Leaf {
                key: key.to_vec(),
                value: value.to_vec(),
            },
        );
        Ok(())
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.entries
            .get(&keccak256(key).0)
            .map(|leaf| leaf.value.as_slice())
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        self.entries.contains_key(&keccak256(key).0)
    }

    /// Removes `key`; removing an absent key is a no-op.
    pub fn delete(&mut self, key: &[u8]) {
        self.entries.remove(&keccak256(key).0);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// (logical key, value) pairs in hashed-key order.
    pub fn iter(&self) -> impl Iterator<Item = (&[u8], &[u8])> {
        self.entries
            .values()
            .map(|leaf| (leaf.key.as_slice(), leaf.value.as_slice()))
    }

    pub fn root(&self) -> Digest {
        let leaves: Vec<(&[u8; 32], &Leaf)> = self.entries.iter().collect();
        Self::subtree_hash(&leaves, 0)
    }

    fn subtree_hash(leaves: &[(&[u8; 32], &Leaf)], depth: usize) -> Digest {
        match leaves {
            [] => Digest::ZERO,
            [(hashed_key, leaf)] => {
                let mut preimage = Vec::with_capacity(65);
                preimage.push(0x00);
                preimage.extend_from_slice(*hashed_key);
                preimage.extend_from_slice(&keccak256(&leaf.value).0);
                keccak256(&preimage)
            }
            _ => {
                debug_assert!(depth < 256, "distinct hashed keys diverge within 256 bits");
                let split = leaves.partition_point(|(hashed_key, _)| !bit(hashed_key, depth));
                let left = Self::subtree_hash(&leaves[..split], depth + 1);
                let right = Self::subtree_hash(&leaves[split..], depth + 1);
                let mut preimage = Vec::with_capacity(65);
                preimage.push(0x01);
                preimage.extend_from_slice(&left.0);
                preimage.extend_from_slice(&right.0);
                keccak256(&preimage)
            }
        }
    }
}

/// Bit `index` (0 = most significant) of a 32-byte key.
fn bit(bytes: &[u8; 32], index: usize) -> bool {
    (bytes[index / 8] >> (7 - index % 8)) & 1 == 1
}
