//! Slot-level encoding and decoding of variables: packed values, fixed
//! arrays, dynamic arrays with keccak-derived data areas, short/long
//! bytes/strings, and hash-keyed mapping entries.

use thiserror::Error;

use crate::hash::keccak256;
use crate::layout::{
    bytes_used_in_slot, elems_per_slot, slots_for_elems, StorageLayout, TypeDescriptor,
};
use crate::slots::{SlotKey, SlotWord, StorageMap, WORD_BYTES};
use crate::value::LogicalValue;

/// Longest dynamic length this simulator will decode. Anything larger is a
/// corrupt header at desk scale.
pub const MAX_DYN_LENGTH: u64 = u32::MAX as u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StorageError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}`: expected {expected}, got {got}")]
    KindMismatch {
        variable: String,
        expected: &'static str,
        got: String,
    },
    #[error("variable `{0}` is a mapping; whole-variable writes are unsupported")]
    MappingWriteUnsupported(String),
    #[error("variable `{0}` is a mapping; whole-variable reads are unsupported")]
    MappingReadUnsupported(String),
    #[error("variable `{0}`: bytes header inconsistent with stored length claim")]
    MalformedBytesHeader(String),
    #[error("variable `{0}`: stored length exceeds the supported maximum")]
    OversizeLength(String),
}

/// Slot-granular access used by the encoders. The plain [`StorageMap`]
/// implementation is unmetered; the gas module provides a metered one.
pub trait SlotStore {
    fn load(&mut self, key: &SlotKey) -> SlotWord;
    fn store(&mut self, key: SlotKey, word: SlotWord);
    /// keccak-256 slot derivation (data areas, mapping entries).
    fn derive_slot(&mut self, preimage: &[u8]) -> SlotKey;
}

impl SlotStore for StorageMap {
    fn load(&mut self, key: &SlotKey) -> SlotWord {
        self.get(key)
    }

    fn store(&mut self, key: SlotKey, word: SlotWord) {
        self.set(key, word);
    }

    fn derive_slot(&mut self, preimage: &[u8]) -> SlotKey {
        SlotKey(keccak256(preimage).0)
    }
}

/// First slot of the data area of a dynamic variable headed at
/// `header_slot`: keccak-256 of the 32-byte big-endian slot index.
pub fn data_area_slot(header_slot: SlotKey) -> SlotKey {
    SlotKey(keccak256(header_slot.as_bytes()).0)
}

/// Position of element `index` of a dynamic array headed at `header_slot`
/// with `elem_width`-byte elements.
pub fn element_location(header_slot: SlotKey, elem_width: u8, index: u64) -> (SlotKey, u8) {
    let per_slot = elems_per_slot(elem_width);
    let slot = data_area_slot(header_slot).wrapping_add((index / per_slot) as u128);
    let offset = ((index % per_slot) * elem_width as u64) as u8;
    (slot, offset)
}

/// Entry slot of a mapping headed at `header_slot` for `key`:
/// keccak-256(key left-padded to 32 bytes || 32-byte header slot index).
pub fn mapping_entry_slot(header_slot: SlotKey, key: &[u8]) -> Result<SlotKey, StorageError> {
    let preimage = mapping_preimage(header_slot, key)?;
    Ok(SlotKey(keccak256(&preimage).0))
}

fn mapping_preimage(header_slot: SlotKey, key: &[u8]) -> Result<[u8; 64], StorageError> {
    if key.len() > WORD_BYTES {
        return Err(StorageError::KindMismatch {
            variable: String::new(),
            expected: "mapping key of at most 32 bytes",
            got: format!("{} bytes", key.len()),
        });
    }
    let mut preimage = [0u8; 64];
    preimage[WORD_BYTES - key.len()..WORD_BYTES].copy_from_slice(key);
    preimage[WORD_BYTES..].copy_from_slice(header_slot.as_bytes());
    Ok(preimage)
}

fn kind_mismatch(variable: &str, expected: &'static str, got: &LogicalValue) -> StorageError {
    StorageError::KindMismatch {
        variable: variable.to_string(),
        expected,
        got: got.kind_name().to_string(),
    }
}

/// Writes a sub-word value, preserving the other bytes of the word. Full
/// 32-byte writes skip the read-modify-write load.
fn write_subword<S: SlotStore>(store: &mut S, slot: SlotKey, offset: u8, bytes: &[u8]) {
    if bytes.len() == WORD_BYTES {
        let mut word = SlotWord::ZERO;
        word.0.copy_from_slice(bytes);
        store.store(slot, word);
    } else {
        let mut word = store.load(&slot);
        word.write_range(offset as usize, bytes);
        store.store(slot, word);
    }
}

fn expect_uint<'v>(
    variable: &str,
    value: &'v LogicalValue,
    width: u8,
) -> Result<&'v [u8; WORD_BYTES], StorageError> {
    let LogicalValue::Uint(word) = value else {
        return Err(kind_mismatch(variable, "uint", value));
    };
    if !LogicalValue::word_fits(word, width) {
        return Err(StorageError::KindMismatch {
            variable: variable.to_string(),
            expected: "uint fitting the declared width",
            got: format!("value wider than {width} bytes"),
        });
    }
    Ok(word)
}

/// Composes the packed data slots for `elems` and stores them starting at
/// `base`. Slots are owned exclusively by the array, so words are built from
/// zero and stored whole.
fn store_packed_elems<S: SlotStore>(
    store: &mut S,
    base: SlotKey,
    elem_width: u8,
    elems: &[[u8; WORD_BYTES]],
) {
    let per_slot = elems_per_slot(elem_width) as usize;
    let width = elem_width as usize;
    for (slot_idx, chunk) in elems.chunks(per_slot).enumerate() {
        let mut word = SlotWord::ZERO;
        for (i, elem) in chunk.iter().enumerate() {
            word.write_range(i * width, &elem[WORD_BYTES - width..]);
        }
        store.store(base.wrapping_add(slot_idx as u128), word);
    }
}

fn load_packed_elems<S: SlotStore>(
    store: &mut S,
    base: SlotKey,
    elem_width: u8,
    length: u64,
) -> Vec<[u8; WORD_BYTES]> {
    let per_slot = elems_per_slot(elem_width);
    let width = elem_width as usize;
    let mut out = Vec::with_capacity(length as usize);
    let mut slot_idx = 0u64;
    while slot_idx * per_slot < length {
        let word = store.load(&base.wrapping_add(slot_idx as u128));
        let in_slot = (length - slot_idx * per_slot).min(per_slot);
        for i in 0..in_slot as usize {
            let mut elem = [0u8; WORD_BYTES];
            elem[WORD_BYTES - width..].copy_from_slice(word.read_range(i * width, width));
            out.push(elem);
        }
        slot_idx += 1;
    }
    out
}

/// Bytes header decoded into its stored form.
enum BytesForm {
    Short { len: u8 },
    Long { len: u64 },
}

fn decode_bytes_header(variable: &str, header: SlotWord) -> Result<BytesForm, StorageError> {
    let low = header.0[WORD_BYTES - 1];
    if low & 1 == 0 {
        let len = low >> 1;
        if len > 31 {
            return Err(StorageError::MalformedBytesHeader(variable.to_string()));
        }
        Ok(BytesForm::Short { len })
    } else {
        let value = header
            .to_u64()
            .ok_or_else(|| StorageError::OversizeLength(variable.to_string()))?;
        let len = (value - 1) / 2;
        if len < 32 {
            return Err(StorageError::MalformedBytesHeader(variable.to_string()));
        }
        if len > MAX_DYN_LENGTH {
            return Err(StorageError::OversizeLength(variable.to_string()));
        }
        Ok(BytesForm::Long { len })
    }
}

fn long_bytes_slots(len: u64) -> u64 {
    len.div_ceil(WORD_BYTES as u64)
}

/// Encodes `value` into the storage positions assigned to `name`.
///
/// Dynamic arrays and bytes/strings first shrink away any previously stored
/// data beyond the new extent, so overwrites never leave stale payload.
pub fn write_variable<S: SlotStore>(
    store: &mut S,
    layout: &StorageLayout,
    name: &str,
    value: &LogicalValue,
) -> Result<(), StorageError> {
    let var = layout
        .get(name)
        .ok_or_else(|| StorageError::UnknownVariable(name.to_string()))?;
    match &var.descriptor {
        TypeDescriptor::Value { width } => {
            let word = expect_uint(name, value, *width)?;
            let bytes = word[WORD_BYTES - *width as usize..].to_vec();
            write_subword(store, var.slot, var.offset, &bytes);
        }
        TypeDescriptor::Bool => {
            let LogicalValue::Boolean(b) = value else {
                return Err(kind_mismatch(name, "bool", value));
            };
            write_subword(store, var.slot, var.offset, &[u8::from(*b)]);
        }
        TypeDescriptor::FixedArray { elem_width, length } => {
            let LogicalValue::List(elems) = value else {
                return Err(kind_mismatch(name, "list", value));
            };
            if elems.len() as u64 != *length as u64 {
                return Err(StorageError::KindMismatch {
                    variable: name.to_string(),
                    expected: "list matching the fixed array length",
                    got: format!("{} elements (declared {length})", elems.len()),
                });
            }
            for elem in elems {
                expect_uint(name, &LogicalValue::Uint(*elem), *elem_width)?;
            }
            store_packed_elems(store, var.slot, *elem_width, elems);
        }
        TypeDescriptor::DynArray { elem_width } => {
            let LogicalValue::List(elems) = value else {
                return Err(kind_mismatch(name, "list", value));
            };
            for elem in elems {
                expect_uint(name, &LogicalValue::Uint(*elem), *elem_width)?;
            }
            let old_header = store.load(&var.slot);
            let old_len = old_header
                .to_u64()
                .filter(|l| *l <= MAX_DYN_LENGTH)
                .ok_or_else(|| StorageError::OversizeLength(name.to_string()))?;
            let new_len = elems.len() as u64;
            store.store(var.slot, SlotWord::from_u64(new_len));
            if old_len == 0 && new_len == 0 {
                return Ok(());
            }
            let area = store.derive_slot(var.slot.as_bytes());
            store_packed_elems(store, area, *elem_width, elems);
            let old_slots = slots_for_elems(*elem_width, old_len);
            let new_slots = slots_for_elems(*elem_width, new_len);
            for stale in new_slots..old_slots {
                store.store(area.wrapping_add(stale as u128), SlotWord::ZERO);
            }
        }
        TypeDescriptor::Bytes => {
            let LogicalValue::ByteString(data) = value else {
                return Err(kind_mismatch(name, "bytes", value));
            };
            if data.len() as u64 > MAX_DYN_LENGTH {
                return Err(StorageError::OversizeLength(name.to_string()));
            }
            let old_header = store.load(&var.slot);
            let old_slots = match decode_bytes_header(name, old_header)? {
                BytesForm::Short { .. } => 0,
                BytesForm::Long { len } => long_bytes_slots(len),
            };
            let len = data.len() as u64;
            let new_slots = if len <= 31 { 0 } else { long_bytes_slots(len) };
            if len <= 31 {
                let mut header = SlotWord::ZERO;
                header.0[..data.len()].copy_from_slice(data);
                header.0[WORD_BYTES - 1] = (len as u8) * 2;
                store.store(var.slot, header);
            } else {
                store.store(var.slot, SlotWord::from_u64(2 * len + 1));
            }
            if old_slots > 0 || new_slots > 0 {
                let area = store.derive_slot(var.slot.as_bytes());
                for (idx, chunk) in data.chunks(WORD_BYTES).enumerate() {
                    if new_slots == 0 {
                        break;
                    }
                    let mut word = SlotWord::ZERO;
                    word.0[..chunk.len()].copy_from_slice(chunk);
                    store.store(area.wrapping_add(idx as u128), word);
                }
                for stale in new_slots..old_slots {
                    store.store(area.wrapping_add(stale as u128), SlotWord::ZERO);
                }
            }
        }
        TypeDescriptor::Mapping { .. } => {
            return Err(StorageError::MappingWriteUnsupported(name.to_string()));
        }
    }
    Ok(())
}

/// Decodes the value of `name` from storage. Absent slots decode as the
/// zero value of the variable's kind.
pub fn read_variable<S: SlotStore>(
    store: &mut S,
    layout: &StorageLayout,
    name: &str,
) -> Result<LogicalValue, StorageError> {
    let var = layout
        .get(name)
        .ok_or_else(|| StorageError::UnknownVariable(name.to_string()))?;
    Ok(match &var.descriptor {
        TypeDescriptor::Value { width } => {
            let word = store.load(&var.slot);
            let mut out = [0u8; WORD_BYTES];
            let w = *width as usize;
            out[WORD_BYTES - w..].copy_from_slice(word.read_range(var.offset as usize, w));
            LogicalValue::Uint(out)
        }
        TypeDescriptor::Bool => {
            let word = store.load(&var.slot);
            LogicalValue::Boolean(word.read_range(var.offset as usize, 1)[0] != 0)
        }
        TypeDescriptor::FixedArray { elem_width, length } => LogicalValue::List(
            load_packed_elems(store, var.slot, *elem_width, *length as u64),
        ),
        TypeDescriptor::DynArray { elem_width } => {
            let len = store
                .load(&var.slot)
                .to_u64()
                .filter(|l| *l <= MAX_DYN_LENGTH)
                .ok_or_else(|| StorageError::OversizeLength(name.to_string()))?;
            if len == 0 {
                LogicalValue::List(Vec::new())
            } else {
                let area = store.derive_slot(var.slot.as_bytes());
                LogicalValue::List(load_packed_elems(store, area, *elem_width, len))
            }
        }
        TypeDescriptor::Bytes => {
            let header = store.load(&var.slot);
            match decode_bytes_header(name, header)? {
                BytesForm::Short { len } => {
                    LogicalValue::ByteString(header.0[..len as usize].to_vec())
                }
                BytesForm::Long { len } => {
                    let area = store.derive_slot(var.slot.as_bytes());
                    let mut data = Vec::with_capacity(len as usize);
                    for idx in 0..long_bytes_slots(len) {
                        let word = store.load(&area.wrapping_add(idx as u128));
                        data.extend_from_slice(&word.0);
                    }
                    data.truncate(len as usize);
                    LogicalValue::ByteString(data)
                }
            }
        }
        TypeDescriptor::Mapping { .. } => {
            return Err(StorageError::MappingReadUnsupported(name.to_string()));
        }
    })
}

/// Writes one mapping entry at its keccak-derived slot.
pub fn write_mapping_entry<S: SlotStore>(
    store: &mut S,
    layout: &StorageLayout,
    name: &str,
    key: &[u8],
    value: &LogicalValue,
) -> Result<(), StorageError> {
    let var = layout
        .get(name)
        .ok_or_else(|| StorageError::UnknownVariable(name.to_string()))?;
    let TypeDescriptor::Mapping { value_width, .. } = &var.descriptor else {
        return Err(StorageError::KindMismatch {
            variable: name.to_string(),
            expected: "mapping",
            got: "non-mapping variable".to_string(),
        });
    };
    let word = expect_uint(name, value, *value_width)?;
    let preimage = mapping_preimage(var.slot, key).map_err(|e| name_mismatch(name, e))?;
    let entry = store.derive_slot(&preimage);
    let bytes = word[WORD_BYTES - *value_width as usize..].to_vec();
    write_subword(store, entry, 0, &bytes);
    Ok(())
}

/// Reads one mapping entry; absent entries decode as zero.
pub fn read_mapping_entry<S: SlotStore>(
    store: &mut S,
    layout: &StorageLayout,
    name: &str,
    key: &[u8],
) -> Result<LogicalValue, StorageError> {
    let var = layout
        .get(name)
        .ok_or_else(|| StorageError::UnknownVariable(name.to_string()))?;
    let TypeDescriptor::Mapping { value_width, .. } = &var.descriptor else {
        return Err(StorageError::KindMismatch {
            variable: name.to_string(),
            expected: "mapping",
            got: "non-mapping variable".to_string(),
        });
    };
    let preimage = mapping_preimage(var.slot, key).map_err(|e| name_mismatch(name, e))?;
    let entry = store.derive_slot(&preimage);
    let word = store.load(&entry);
    let mut out = [0u8; WORD_BYTES];
    let w = *value_width as usize;
    out[WORD_BYTES - w..].copy_from_slice(word.read_range(0, w));
    Ok(LogicalValue::Uint(out))
}

fn name_mismatch(name: &str, err: StorageError) -> StorageError {
    match err {
        StorageError::KindMismatch { expected, got, .. } => StorageError::KindMismatch {
            variable: name.to_string(),
            expected,
            got,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{assign_layout, VariableDecl};

    fn layout_of(decls: &[(&str, TypeDescriptor)]) -> StorageLayout {
        let decls: Vec<VariableDecl> = decls
            .iter()
            .map(|(n, d)| VariableDecl::new(*n, d.clone()))
            .collect();
        assign_layout(&decls).unwrap()
    }

    #[test]
    fn value_write_is_direct_encoding() {
        let layout = layout_of(&[("a", TypeDescriptor::Value { width: 32 })]);
        let mut store = StorageMap::new();
        write_variable(&mut store, &layout, "a", &LogicalValue::uint_from_u64(7)).unwrap();
        assert_eq!(store.get(&SlotKey::from_u64(0)), SlotWord::from_u64(7));
    }

    // Data area of slot 0 is keccak256(32 zero bytes); checked against the
    // independently known constant.
    #[test]
    fn data_area_matches_keccak_of_slot_index() {
        assert_eq!(
            data_area_slot(SlotKey::ZERO),
            SlotKey::from_hex("0x290decd9548b62a8d60345a988386fc84ba6bc95484008f6362f93160ef3e563")
                .unwrap()
        );
        assert_eq!(
            data_area_slot(SlotKey::from_u64(2)),
            SlotKey(keccak256(SlotKey::from_u64(2).as_bytes()).0)
        );
        // distinctness smoke check
        for p in 0..16u64 {
            for q in (p + 1)..16 {
                assert_ne!(
                    data_area_slot(SlotKey::from_u64(p)),
                    data_area_slot(SlotKey::from_u64(q))
                );
            }
        }
    }

    #[test]
    fn element_locations() {
        let p = SlotKey::from_u64(11);
        let area = data_area_slot(p);
        assert_eq!(element_location(p, 32, 3), (area.wrapping_add(3), 0));
        // brute-force packing: 16-byte elements, 2 per slot
        assert_eq!(element_location(p, 16, 3), (area.wrapping_add(1), 16));
        assert_eq!(element_location(p, 1, 0), (area, 0));
    }

    #[test]
    fn short_string_lives_in_header_slot() {
        let layout = layout_of(&[
            ("a", TypeDescriptor::Value { width: 32 }),
            ("x", TypeDescriptor::FixedArray { elem_width: 32, length: 3 }),
            ("s", TypeDescriptor::Bytes),
        ]);
        assert_eq!(layout.get("s").unwrap().slot, SlotKey::from_u64(4));
        let mut store = StorageMap::new();
        write_variable(
            &mut store,
            &layout,
            "s",
            &LogicalValue::ByteString(b"abc".to_vec()),
        )
        .unwrap();
        let word = store.get(&SlotKey::from_u64(4));
        assert_eq!(&word.0[..3], b"abc");
        assert_eq!(word.0[31], 6); // 2 * len
        assert!(word.0[3..31].iter().all(|b| *b == 0));
    }

    #[test]
    fn long_string_uses_data_area() {
        let layout = layout_of(&[("s", TypeDescriptor::Bytes)]);
        let mut store = StorageMap::new();
        let data = vec![0x61u8; 32];
        write_variable(&mut store, &layout, "s", &LogicalValue::ByteString(data.clone())).unwrap();
        let header = store.get(&SlotKey::from_u64(0));
        assert_eq!(header, SlotWord::from_u64(65)); // 2 * 32 + 1
        let area = data_area_slot(SlotKey::from_u64(0));
        assert_eq!(store.get(&area).0.to_vec(), data);
        assert_eq!(
            read_variable(&mut store, &layout, "s").unwrap(),
            LogicalValue::ByteString(data)
        );
    }

    #[test]
    fn boundary_31_and_32() {
        let layout = layout_of(&[("s", TypeDescriptor::Bytes)]);
        for len in [31usize, 32] {
            let mut store = StorageMap::new();
            let data: Vec<u8> = (0..len as u8).map(|b| b + 1).collect();
            write_variable(&mut store, &layout, "s", &LogicalValue::ByteString(data.clone()))
                .unwrap();
            if len == 31 {
                assert_eq!(store.len(), 1);
                assert_eq!(store.get(&SlotKey::from_u64(0)).0[31], 62);
            } else {
                assert_eq!(store.len(), 2);
            }
            assert_eq!(
                read_variable(&mut store, &layout, "s").unwrap(),
                LogicalValue::ByteString(data)
            );
        }
    }

    #[test]
    fn reads_from_empty_store_are_zero_values() {
        let layout = layout_of(&[
            ("v", TypeDescriptor::Value { width: 8 }),
            ("b", TypeDescriptor::Bool),
            ("f", TypeDescriptor::FixedArray { elem_width: 16, length: 2 }),
            ("d", TypeDescriptor::DynArray { elem_width: 32 }),
            ("s", TypeDescriptor::Bytes),
        ]);
        let mut store = StorageMap::new();
        for var in layout.variables() {
            let read = read_variable(&mut store, &layout, &var.name).unwrap();
            assert_eq!(read, LogicalValue::zero_of(&var.descriptor).unwrap());
        }
    }

    #[test]
    fn dyn_array_round_trip_and_shrink_clears_tail() {
        let layout = layout_of(&[("xs", TypeDescriptor::DynArray { elem_width: 16 })]);
        let mut store = StorageMap::new();
        let long: Vec<[u8; 32]> = (1..=5u64)
            .map(|v| {
                let LogicalValue::Uint(w) = LogicalValue::uint_from_u64(v) else {
                    unreachable!()
                };
                w
            })
            .collect();
        write_variable(&mut store, &layout, "xs", &LogicalValue::List(long.clone())).unwrap();
        assert_eq!(
            read_variable(&mut store, &layout, "xs").unwrap(),
            LogicalValue::List(long.clone())
        );
        // header + ceil(5/2) data slots
        assert_eq!(store.len(), 4);

        let short = long[..1].to_vec();
        write_variable(&mut store, &layout, "xs", &LogicalValue::List(short.clone())).unwrap();
        assert_eq!(
            read_variable(&mut store, &layout, "xs").unwrap(),
            LogicalValue::List(short)
        );
        assert_eq!(store.len(), 2);

        write_variable(&mut store, &layout, "xs", &LogicalValue::List(vec![])).unwrap();
        assert!(store.is_empty());
    }

    #[test]
    fn malformed_bytes_headers_rejected() {
        let layout = layout_of(&[("s", TypeDescriptor::Bytes)]);
        let mut store = StorageMap::new();
        // even low byte claiming length 40 (> 31)
        let mut bad = SlotWord::ZERO;
        bad.0[31] = 80;
        store.set(SlotKey::from_u64(0), bad);
        assert_eq!(
            read_variable(&mut store, &layout, "s").unwrap_err(),
            StorageError::MalformedBytesHeader("s".into())
        );
        // odd low byte claiming long form with length 5 (< 32)
        let mut bad = SlotWord::ZERO;
        bad.0[31] = 11;
        store.set(SlotKey::from_u64(0), bad);
        assert_eq!(
            read_variable(&mut store, &layout, "s").unwrap_err(),
            StorageError::MalformedBytesHeader("s".into())
        );
    }

    #[test]
    fn long_header_with_data_present_decodes() {
        let layout = layout_of(&[("s", TypeDescriptor::Bytes)]);
        let mut store = StorageMap::new();
        // header 0x...41 = 65, odd: long form, length 32
        store.set(SlotKey::from_u64(0), SlotWord::from_u64(0x41));
        let mut word = SlotWord::ZERO;
        word.0.copy_from_slice(&[0x5au8; 32]);
        store.set(data_area_slot(SlotKey::from_u64(0)), word);
        assert_eq!(
            read_variable(&mut store, &layout, "s").unwrap(),
            LogicalValue::ByteString(vec![0x5a; 32])
        );
    }

    #[test]
    fn mapping_entries() {
        let layout = layout_of(&[
            ("a", TypeDescriptor::Value { width: 32 }),
            ("b", TypeDescriptor::Value { width: 32 }),
            ("c", TypeDescriptor::Value { width: 32 }),
            ("m", TypeDescriptor::Mapping { key_kind: "bytes32".into(), value_width: 32 }),
        ]);
        assert_eq!(layout.get("m").unwrap().slot, SlotKey::from_u64(3));
        // entry slot = keccak(key padded to 32 bytes || header slot index)
        let mut preimage = [0u8; 64];
        preimage[31] = 1;
        preimage[63] = 3;
        assert_eq!(
            mapping_entry_slot(SlotKey::from_u64(3), &[1]).unwrap(),
            SlotKey(keccak256(&preimage).0)
        );

        let mut store = StorageMap::new();
        write_mapping_entry(&mut store, &layout, "m", &[1], &LogicalValue::uint_from_u64(42))
            .unwrap();
        assert_eq!(
            read_mapping_entry(&mut store, &layout, "m", &[1]).unwrap(),
            LogicalValue::uint_from_u64(42)
        );
        assert_eq!(
            read_mapping_entry(&mut store, &layout, "m", &[2]).unwrap(),
            LogicalValue::uint_from_u64(0)
        );
        assert_ne!(
            mapping_entry_slot(SlotKey::from_u64(3), &[1]).unwrap(),
            mapping_entry_slot(SlotKey::from_u64(3), &[2]).unwrap()
        );

        assert_eq!(
            write_variable(&mut store, &layout, "m", &LogicalValue::uint_from_u64(1)).unwrap_err(),
            StorageError::MappingWriteUnsupported("m".into())
        );
        assert_eq!(
            read_variable(&mut store, &layout, "m").unwrap_err(),
            StorageError::MappingReadUnsupported("m".into())
        );
    }

    #[test]
    fn zero_writes_leave_no_entries() {
        let layout = layout_of(&[
            ("v", TypeDescriptor::Value { width: 4 }),
            ("s", TypeDescriptor::Bytes),
            ("d", TypeDescriptor::DynArray { elem_width: 32 }),
        ]);
        let mut store = StorageMap::new();
        write_variable(&mut store, &layout, "v", &LogicalValue::uint_from_u64(0)).unwrap();
        write_variable(&mut store, &layout, "s", &LogicalValue::ByteString(vec![])).unwrap();
        write_variable(&mut store, &layout, "d", &LogicalValue::List(vec![])).unwrap();
        assert!(store.is_empty());
    }

    #[test]
    fn kind_and_width_mismatches() {
        let layout = layout_of(&[
            ("v", TypeDescriptor::Value { width: 2 }),
            ("f", TypeDescriptor::FixedArray { elem_width: 8, length: 2 }),
        ]);
        let mut store = StorageMap::new();
        assert!(matches!(
            write_variable(&mut store, &layout, "v", &LogicalValue::uint_from_u64(0x1_0000)),
            Err(StorageError::KindMismatch { .. })
        ));
        assert!(matches!(
            write_variable(&mut store, &layout, "v", &LogicalValue::Boolean(true)),
            Err(StorageError::KindMismatch { .. })
        ));
        assert!(matches!(
            write_variable(&mut store, &layout, "f", &LogicalValue::List(vec![[0u8; 32]; 3])),
            Err(StorageError::KindMismatch { .. })
        ));
        assert!(matches!(
            write_variable(&mut store, &layout, "nope", &LogicalValue::Boolean(true)),
            Err(StorageError::UnknownVariable(_))
        ));
    }
}
