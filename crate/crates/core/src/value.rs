//! Layout-independent representation of the values a storage variable can
//! hold. Round-trip checks compare these across layout changes.

use crate::layout::TypeDescriptor;
use crate::slots::WORD_BYTES;

/// A decoded variable value, independent of where it lives in storage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LogicalValue {
    /// 256-bit unsigned integer, big-endian.
    Uint([u8; WORD_BYTES]),
    Boolean(bool),
    /// Arbitrary byte sequence (covers both `bytes` and `string`).
    ByteString(Vec<u8>),
    /// Sequence of 256-bit unsigned integers (fixed or dynamic arrays).
    List(Vec<[u8; WORD_BYTES]>),
}

impl LogicalValue {
    pub fn uint_from_u64(v: u64) -> Self {
        let mut word = [0u8; WORD_BYTES];
        word[24..].copy_from_slice(&v.to_be_bytes());
        LogicalValue::Uint(word)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LogicalValue::Uint(_) => "uint",
            LogicalValue::Boolean(_) => "bool",
            LogicalValue::ByteString(_) => "bytes",
            LogicalValue::List(_) => "list",
        }
    }

    /// Whether a big-endian word fits in `width` bytes.
    pub fn word_fits(word: &[u8; WORD_BYTES], width: u8) -> bool {
        word[..WORD_BYTES - width as usize].iter().all(|b| *b == 0)
    }

    /// The zero/default value a variable of the given descriptor decodes to
    /// from empty storage. `None` for mappings, which have no whole-variable
    /// value.
    pub fn zero_of(descriptor: &TypeDescriptor) -> Option<LogicalValue> {
        match descriptor {
            TypeDescriptor::Value { .. } => Some(LogicalValue::Uint([0u8; WORD_BYTES])),
            TypeDescriptor::Bool => Some(LogicalValue::Boolean(false)),
            TypeDescriptor::FixedArray { length, .. } => Some(LogicalValue::List(vec![
                [0u8; WORD_BYTES];
                *length as usize
            ])),
            TypeDescriptor::DynArray { .. } => Some(LogicalValue::List(Vec::new())),
            TypeDescriptor::Bytes => Some(LogicalValue::ByteString(Vec::new())),
            TypeDescriptor::Mapping { .. } => None,
        }
    }

    /// True when the value is the zero/default of its kind.
    pub fn is_zero(&self) -> bool {
        match self {
            LogicalValue::Uint(w) => w.iter().all(|b| *b == 0),
            LogicalValue::Boolean(b) => !b,
            LogicalValue::ByteString(b) => b.is_empty(),
            LogicalValue::List(items) => items.iter().all(|w| w.iter().all(|b| *b == 0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_check() {
        let v = LogicalValue::uint_from_u64(0x1_0000);
        let LogicalValue::Uint(word) = v else { unreachable!() };
        assert!(LogicalValue::word_fits(&word, 3));
        assert!(!LogicalValue::word_fits(&word, 2));
        assert!(LogicalValue::word_fits(&[0u8; 32], 1));
    }

    #[test]
    fn zero_values() {
        assert_eq!(
            LogicalValue::zero_of(&TypeDescriptor::Bool),
            Some(LogicalValue::Boolean(false))
        );
        let z = LogicalValue::zero_of(&TypeDescriptor::FixedArray {
            elem_width: 16,
            length: 3,
        })
        .unwrap();
        assert_eq!(z, LogicalValue::List(vec![[0u8; 32]; 3]));
        assert!(z.is_zero());
        assert_eq!(
            LogicalValue::zero_of(&TypeDescriptor::Mapping {
                key_kind: "bytes32".into(),
                value_width: 32
            }),
            None
        );
    }
}
