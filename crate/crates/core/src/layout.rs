//! Storage layout assignment: maps an ordered list of variable declarations
//! to (slot, offset) positions under Solidity's packing rules, and defines
//! the canonical layout serialization whose digest binds reorganization
//! plans to the layouts they were generated from.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::{CanonError, Decoder, Encoder};
use crate::hash::{keccak256, Digest};
use crate::slots::{SlotKey, WORD_BYTES};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("invalid value width {0} (must be 1..=32)")]
    InvalidWidth(u8),
    #[error("invalid fixed array length {0} (must be >= 1)")]
    InvalidLength(u32),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("malformed layout encoding: {0}")]
    Canon(#[from] CanonError),
}

/// The storage type of one declared variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeDescriptor {
    /// Fixed-width value occupying `width` bytes, packable.
    Value { width: u8 },
    /// One-byte boolean.
    Bool,
    /// `length` elements of `elem_width` bytes each, in consecutive slots
    /// starting at the declared slot.
    FixedArray { elem_width: u8, length: u32 },
    /// Length in the header slot, elements in the keccak-derived data area.
    DynArray { elem_width: u8 },
    /// bytes/string: short form in the header slot, long form in the data
    /// area.
    Bytes,
    /// Keyed entries at keccak-derived slots; the header slot itself holds
    /// nothing.
    Mapping { key_kind: String, value_width: u8 },
}

impl TypeDescriptor {
    pub fn validate(&self) -> Result<(), LayoutError> {
        let check_width = |w: u8| {
            if w == 0 || w as usize > WORD_BYTES {
                Err(LayoutError::InvalidWidth(w))
            } else {
                Ok(())
            }
        };
        match self {
            TypeDescriptor::Value { width } => check_width(*width),
            TypeDescriptor::Bool | TypeDescriptor::Bytes => Ok(()),
            TypeDescriptor::FixedArray { elem_width, length } => {
                check_width(*elem_width)?;
                if *length == 0 {
                    return Err(LayoutError::InvalidLength(0));
                }
                Ok(())
            }
            TypeDescriptor::DynArray { elem_width } => check_width(*elem_width),
            TypeDescriptor::Mapping { value_width, .. } => check_width(*value_width),
        }
    }

    /// Byte width a packable value of this type occupies, or `None` for
    /// types that own whole slots.
    pub fn packed_width(&self) -> Option<u8> {
        match self {
            TypeDescriptor::Value { width } => Some(*width),
            TypeDescriptor::Bool => Some(1),
            _ => None,
        }
    }

    pub fn is_mapping(&self) -> bool {
        matches!(self, TypeDescriptor::Mapping { .. })
    }

    fn canon_encode(&self, enc: &mut Encoder) {
        match self {
            TypeDescriptor::Value { width } => {
                enc.uint(0).uint(*width as u64);
            }
            TypeDescriptor::Bool => {
                enc.uint(1);
            }
            TypeDescriptor::FixedArray { elem_width, length } => {
                enc.uint(2).uint(*elem_width as u64).uint(*length as u64);
            }
            TypeDescriptor::DynArray { elem_width } => {
                enc.uint(3).uint(*elem_width as u64);
            }
            TypeDescriptor::Bytes => {
                enc.uint(4);
            }
            TypeDescriptor::Mapping {
                key_kind,
                value_width,
            } => {
                enc.uint(5).bytes(key_kind.as_bytes()).uint(*value_width as u64);
            }
        }
    }

    fn canon_decode(dec: &mut Decoder) -> Result<Self, LayoutError> {
        let tag = dec.uint()?;
        Ok(match tag {
            0 => TypeDescriptor::Value {
                width: dec.uint()? as u8,
            },
            1 => TypeDescriptor::Bool,
            2 => TypeDescriptor::FixedArray {
                elem_width: dec.uint()? as u8,
                length: dec.uint()? as u32,
            },
            3 => TypeDescriptor::DynArray {
                elem_width: dec.uint()? as u8,
            },
            4 => TypeDescriptor::Bytes,
            5 => TypeDescriptor::Mapping {
                key_kind: String::from_utf8_lossy(&dec.bytes()?).into_owned(),
                value_width: dec.uint()? as u8,
            },
            other => return Err(CanonError::InvalidTag(other).into()),
        })
    }
}

/// One declared variable, before slot assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableDecl {
    pub name: String,
    pub descriptor: TypeDescriptor,
}

impl VariableDecl {
    pub fn new(name: impl Into<String>, descriptor: TypeDescriptor) -> Self {
        Self {
            name: name.into(),
            descriptor,
        }
    }
}

/// A declared variable with its assigned position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayoutVariable {
    pub name: String,
    pub descriptor: TypeDescriptor,
    pub slot: SlotKey,
    pub offset: u8,
}

/// An assigned storage layout: declaration order preserved, positions
/// non-overlapping, slots non-decreasing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StorageLayout {
    variables: Vec<LayoutVariable>,
    next_free_slot: SlotKey,
    by_name: BTreeMap<String, usize>,
}

impl StorageLayout {
    pub fn empty() -> Self {
        StorageLayout {
            variables: Vec::new(),
            next_free_slot: SlotKey::ZERO,
            by_name: BTreeMap::new(),
        }
    }

    pub fn variables(&self) -> &[LayoutVariable] {
        &self.variables
    }

    pub fn next_free_slot(&self) -> SlotKey {
        self.next_free_slot
    }

    pub fn get(&self, name: &str) -> Option<&LayoutVariable> {
        self.by_name.get(name).map(|i| &self.variables[*i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    /// Declarations equivalent to this layout (for re-assignment checks).
    pub fn to_decls(&self) -> Vec<VariableDecl> {
        self.variables
            .iter()
            .map(|v| VariableDecl::new(v.name.clone(), v.descriptor.clone()))
            .collect()
    }

    pub fn canon_encode(&self, enc: &mut Encoder) {
        enc.uint(self.variables.len() as u64);
        for var in &self.variables {
            enc.bytes(var.name.as_bytes());
            var.descriptor.canon_encode(enc);
            enc.word(var.slot.as_bytes()).uint(var.offset as u64);
        }
        enc.word(self.next_free_slot.as_bytes());
    }

    pub fn canon_decode(dec: &mut Decoder) -> Result<Self, LayoutError> {
        let count = dec.uint()?;
        let mut variables = Vec::with_capacity(count as usize);
        let mut by_name = BTreeMap::new();
        for i in 0..count {
            let name = String::from_utf8_lossy(&dec.bytes()?).into_owned();
            let descriptor = TypeDescriptor::canon_decode(dec)?;
            let slot = SlotKey(dec.word()?);
            let offset = dec.uint()? as u8;
            by_name.insert(name.clone(), i as usize);
            variables.push(LayoutVariable {
                name,
                descriptor,
                slot,
                offset,
            });
        }
        let next_free_slot = SlotKey(dec.word()?);
        Ok(StorageLayout {
            variables,
            next_free_slot,
            by_name,
        })
    }

    /// keccak-256 of the canonical layout serialization.
    pub fn digest(&self) -> Digest {
        let mut enc = Encoder::new();
        self.canon_encode(&mut enc);
        keccak256(&enc.finish())
    }
}

/// Elements of `elem_width` bytes that fit in one 32-byte slot.
pub fn elems_per_slot(elem_width: u8) -> u64 {
    debug_assert!(elem_width >= 1 && elem_width as usize <= WORD_BYTES);
    (WORD_BYTES as u64) / elem_width as u64
}

/// Consecutive slots occupied by `length` packed elements of `elem_width`
/// bytes. Elements never span a slot boundary.
pub fn slots_for_elems(elem_width: u8, length: u64) -> u64 {
    if length == 0 {
        return 0;
    }
    length.div_ceil(elems_per_slot(elem_width))
}

/// Bytes used in slot `slot_index` (0-based within the area) by `length`
/// packed elements of `elem_width` bytes.
pub fn bytes_used_in_slot(elem_width: u8, length: u64, slot_index: u64) -> u8 {
    let per_slot = elems_per_slot(elem_width);
    let start = slot_index * per_slot;
    debug_assert!(start < length);
    let elems = (length - start).min(per_slot);
    (elems * elem_width as u64) as u8
}

/// Assigns slots and offsets to `decls` in declaration order.
///
/// A value of width `w` goes into the current slot at the lowest free offset
/// when `w` fits in the remaining bytes, else into a fresh slot at offset 0.
/// Arrays, bytes/strings, and mappings always start a fresh slot, and the
/// variable after them does too.
pub fn assign_layout(decls: &[VariableDecl]) -> Result<StorageLayout, LayoutError> {
    let mut by_name = BTreeMap::new();
    let mut variables = Vec::with_capacity(decls.len());
    let mut cur_slot = SlotKey::ZERO;
    let mut cur_offset: usize = 0; // bytes used in cur_slot

    for decl in decls {
        decl.descriptor.validate()?;
        if by_name.insert(decl.name.clone(), variables.len()).is_some() {
            return Err(LayoutError::DuplicateName(decl.name.clone()));
        }

        let (slot, offset);
        match &decl.descriptor {
            TypeDescriptor::Value { .. } | TypeDescriptor::Bool => {
                let width = decl.descriptor.packed_width().unwrap() as usize;
                if cur_offset + width > WORD_BYTES {
                    cur_slot = cur_slot.wrapping_add(1);
                    cur_offset = 0;
                }
                slot = cur_slot;
                offset = cur_offset as u8;
                cur_offset += width;
                if cur_offset == WORD_BYTES {
                    cur_slot = cur_slot.wrapping_add(1);
                    cur_offset = 0;
                }
            }
            whole => {
                if cur_offset > 0 {
                    cur_slot = cur_slot.wrapping_add(1);
                    cur_offset = 0;
                }
                slot = cur_slot;
                offset = 0;
                let occupied = match whole {
                    TypeDescriptor::FixedArray { elem_width, length } => {
                        slots_for_elems(*elem_width, *length as u64)
                    }
                    _ => 1, // dyn array, bytes, mapping: header slot only
                };
                cur_slot = cur_slot.wrapping_add(occupied as u128);
            }
        }

        variables.push(LayoutVariable {
            name: decl.name.clone(),
            descriptor: decl.descriptor.clone(),
            slot,
            offset,
        });
    }

    let next_free_slot = if cur_offset > 0 {
        cur_slot.wrapping_add(1)
    } else {
        cur_slot
    };
    Ok(StorageLayout {
        variables,
        next_free_slot,
        by_name,
    })
}

// ---------------------------------------------------------------------------
// Layout description files
// ---------------------------------------------------------------------------

/// One entry of a layout description file:
/// `{"name": ..., "type": {"kind": ..., ...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeclEntry {
    pub name: String,
    #[serde(rename = "type")]
    pub type_spec: TypeSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elem_width: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_kind: Option<String>,
}

#[derive(Debug, Error)]
pub enum LayoutFileError {
    #[error("bad layout file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("variable `{name}`: unknown kind `{kind}`")]
    UnknownKind { name: String, kind: String },
    #[error("variable `{name}`: missing field `{field}` for kind `{kind}`")]
    MissingField {
        name: String,
        kind: String,
        field: &'static str,
    },
}

/// Parses a layout description (JSON list of declarations).
pub fn parse_decls(json: &str) -> Result<Vec<VariableDecl>, LayoutFileError> {
    let entries: Vec<DeclEntry> = serde_json::from_str(json)?;
    entries.into_iter().map(decl_from_entry).collect()
}

fn decl_from_entry(entry: DeclEntry) -> Result<VariableDecl, LayoutFileError> {
    let name = entry.name;
    let spec = entry.type_spec;
    let missing = |field: &'static str, kind: &str| LayoutFileError::MissingField {
        name: name.clone(),
        kind: kind.to_string(),
        field,
    };
    let descriptor = match spec.kind.as_str() {
        "value" => TypeDescriptor::Value {
            width: spec.width.ok_or_else(|| missing("width", "value"))?,
        },
        "bool" => TypeDescriptor::Bool,
        "fixed_array" => TypeDescriptor::FixedArray {
            elem_width: spec
                .elem_width
                .ok_or_else(|| missing("elem_width", "fixed_array"))?,
            length: spec.length.ok_or_else(|| missing("length", "fixed_array"))?,
        },
        "dyn_array" => TypeDescriptor::DynArray {
            elem_width: spec
                .elem_width
                .ok_or_else(|| missing("elem_width", "dyn_array"))?,
        },
        "bytes" => TypeDescriptor::Bytes,
        "mapping" => TypeDescriptor::Mapping {
            key_kind: spec.key_kind.unwrap_or_else(|| "bytes32".to_string()),
            value_width: spec.width.ok_or_else(|| missing("width", "mapping"))?,
        },
        other => {
            return Err(LayoutFileError::UnknownKind {
                name,
                kind: other.to_string(),
            })
        }
    };
    Ok(VariableDecl { name, descriptor })
}

/// Computed slot assignment, as emitted back to layout tooling.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssignedEntry {
    pub name: String,
    pub slot: SlotKey,
    pub offset: u8,
}

pub fn assigned_entries(layout: &StorageLayout) -> Vec<AssignedEntry> {
    layout
        .variables()
        .iter()
        .map(|v| AssignedEntry {
            name: v.name.clone(),
            slot: v.slot,
            offset: v.offset,
        })
        .collect()
}
