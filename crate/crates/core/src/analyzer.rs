//! The off-chain layout analyzer: diffs an old and a new storage layout
//! into an ordered reorganization plan, re-derivable and checkable by
//! anyone holding the two layouts.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::{CanonError, Decoder, Encoder};
use crate::hash::Digest;
use crate::layout::{
    bytes_used_in_slot, slots_for_elems, LayoutVariable, StorageLayout, TypeDescriptor,
};
use crate::slots::SlotKey;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("variable `{0}` changed type without being dropped")]
    TypeChangedWithoutDrop(String),
    #[error("mapping `{0}` cannot be relocated; entries are not enumerable")]
    MappingRelocated(String),
    #[error("variable `{0}` was removed from the layout without being dropped")]
    RemovedWithoutDrop(String),
    #[error("dropped name `{0}` is not in the old layout")]
    UnknownDropped(String),
    #[error("malformed plan encoding: {0}")]
    Canon(#[from] CanonError),
}

/// One storage reorganization step. Slot-and-offset coordinates always refer
/// to concrete assigned positions, never to variable names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ReorgInstruction {
    /// Copy `width` bytes between packed positions, preserving unrelated
    /// bytes of the destination word.
    CopyValue {
        old_slot: SlotKey,
        old_offset: u8,
        new_slot: SlotKey,
        new_offset: u8,
        width: u8,
    },
    /// Move a dynamic array: length from header to header, elements between
    /// the derived data areas.
    MoveDynArray {
        old_header: SlotKey,
        new_header: SlotKey,
        elem_width: u8,
    },
    /// Move a bytes/string variable: header verbatim, long-form payload
    /// between the derived data areas.
    MoveBytes {
        old_header: SlotKey,
        new_header: SlotKey,
    },
    /// Zero `width` bytes at a packed position.
    ClearValue { slot: SlotKey, offset: u8, width: u8 },
    /// Zero a dynamic array: header and occupied data area.
    ClearDynArea { header: SlotKey, elem_width: u8 },
    /// Zero a bytes/string variable: header and long-form data area.
    ClearBytesArea { header: SlotKey },
}

/// An ordered reorganization plan bound to the layouts it was generated
/// from by their canonical digests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReorgPlan {
    pub instructions: Vec<ReorgInstruction>,
    pub old_layout_digest: Digest,
    pub new_layout_digest: Digest,
}

impl ReorgPlan {
    pub fn canon_encode(&self, enc: &mut Encoder) {
        enc.word(self.old_layout_digest.as_bytes())
            .word(self.new_layout_digest.as_bytes())
            .uint(self.instructions.len() as u64);
        for instr in &self.instructions {
            match instr {
                ReorgInstruction::CopyValue {
                    old_slot,
                    old_offset,
                    new_slot,
                    new_offset,
                    width,
                } => {
                    enc.uint(0)
                        .word(old_slot.as_bytes())
                        .uint(*old_offset as u64)
                        .word(new_slot.as_bytes())
                        .uint(*new_offset as u64)
                        .uint(*width as u64);
                }
                ReorgInstruction::MoveDynArray {
                    old_header,
                    new_header,
                    elem_width,
                } => {
                    enc.uint(1)
                        .word(old_header.as_bytes())
                        .word(new_header.as_bytes())
                        .uint(*elem_width as u64);
                }
                ReorgInstruction::MoveBytes {
                    old_header,
                    new_header,
                } => {
                    enc.uint(2)
                        .word(old_header.as_bytes())
                        .word(new_header.as_bytes());
                }
                ReorgInstruction::ClearValue {
                    slot,
                    offset,
                    width,
                } => {
                    enc.uint(3)
                        .word(slot.as_bytes())
                        .uint(*offset as u64)
                        .uint(*width as u64);
                }
                ReorgInstruction::ClearDynArea { header, elem_width } => {
                    enc.uint(4).word(header.as_bytes()).uint(*elem_width as u64);
                }
                ReorgInstruction::ClearBytesArea { header } => {
                    enc.uint(5).word(header.as_bytes());
                }
            }
        }
    }

    pub fn canon_decode(dec: &mut Decoder) -> Result<Self, PlanError> {
        let old_layout_digest = Digest(dec.word()?);
        let new_layout_digest = Digest(dec.word()?);
        let count = dec.uint()?;
        let mut instructions = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let tag = dec.uint()?;
            instructions.push(match tag {
                0 => ReorgInstruction::CopyValue {
                    old_slot: SlotKey(dec.word()?),
                    old_offset: dec.uint()? as u8,
                    new_slot: SlotKey(dec.word()?),
                    new_offset: dec.uint()? as u8,
                    width: dec.uint()? as u8,
                },
                1 => ReorgInstruction::MoveDynArray {
                    old_header: SlotKey(dec.word()?),
                    new_header: SlotKey(dec.word()?),
                    elem_width: dec.uint()? as u8,
                },
                2 => ReorgInstruction::MoveBytes {
                    old_header: SlotKey(dec.word()?),
                    new_header: SlotKey(dec.word()?),
                },
                3 => ReorgInstruction::ClearValue {
                    slot: SlotKey(dec.word()?),
                    offset: dec.uint()? as u8,
                    width: dec.uint()? as u8,
                },
                4 => ReorgInstruction::ClearDynArea {
                    header: SlotKey(dec.word()?),
                    elem_width: dec.uint()? as u8,
                },
                5 => ReorgInstruction::ClearBytesArea {
                    header: SlotKey(dec.word()?),
                },
                other => return Err(CanonError::InvalidTag(other).into()),
            });
        }
        Ok(ReorgPlan {
            instructions,
            old_layout_digest,
            new_layout_digest,
        })
    }
}

/// Instruction counts per kind.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PlanStats {
    pub copy_value: usize,
    pub move_dyn_array: usize,
    pub move_bytes: usize,
    pub clear_value: usize,
    pub clear_dyn_area: usize,
    pub clear_bytes_area: usize,
    pub total: usize,
}

pub fn plan_stats(plan: &ReorgPlan) -> PlanStats {
    let mut stats = PlanStats::default();
    for instr in &plan.instructions {
        match instr {
            ReorgInstruction::CopyValue { .. } => stats.copy_value += 1,
            ReorgInstruction::MoveDynArray { .. } => stats.move_dyn_array += 1,
            ReorgInstruction::MoveBytes { .. } => stats.move_bytes += 1,
            ReorgInstruction::ClearValue { .. } => stats.clear_value += 1,
            ReorgInstruction::ClearDynArea { .. } => stats.clear_dyn_area += 1,
            ReorgInstruction::ClearBytesArea { .. } => stats.clear_bytes_area += 1,
        }
    }
    stats.total = plan.instructions.len();
    stats
}

/// Emits the move instructions for a variable preserved at a new position,
/// or nothing when the position is unchanged.
fn emit_move(out: &mut Vec<ReorgInstruction>, old: &LayoutVariable, new: &LayoutVariable) {
    match &old.descriptor {
        TypeDescriptor::Value { width } => {
            if old.slot != new.slot || old.offset != new.offset {
                out.push(ReorgInstruction::CopyValue {
                    old_slot: old.slot,
                    old_offset: old.offset,
                    new_slot: new.slot,
                    new_offset: new.offset,
                    width: *width,
                });
            }
        }
        TypeDescriptor::Bool => {
            if old.slot != new.slot || old.offset != new.offset {
                out.push(ReorgInstruction::CopyValue {
                    old_slot: old.slot,
                    old_offset: old.offset,
                    new_slot: new.slot,
                    new_offset: new.offset,
                    width: 1,
                });
            }
        }
        TypeDescriptor::FixedArray { elem_width, length } => {
            if old.slot != new.slot {
                for k in 0..slots_for_elems(*elem_width, *length as u64) {
                    out.push(ReorgInstruction::CopyValue {
                        old_slot: old.slot.wrapping_add(k as u128),
                        old_offset: 0,
                        new_slot: new.slot.wrapping_add(k as u128),
                        new_offset: 0,
                        width: bytes_used_in_slot(*elem_width, *length as u64, k),
                    });
                }
            }
        }
        TypeDescriptor::DynArray { elem_width } => {
            if old.slot != new.slot {
                out.push(ReorgInstruction::MoveDynArray {
                    old_header: old.slot,
                    new_header: new.slot,
                    elem_width: *elem_width,
                });
            }
        }
        TypeDescriptor::Bytes => {
            if old.slot != new.slot {
                out.push(ReorgInstruction::MoveBytes {
                    old_header: old.slot,
                    new_header: new.slot,
                });
            }
        }
        TypeDescriptor::Mapping { .. } => {
            // pinned; checked by the caller
        }
    }
}

/// Emits the clear instructions for a dropped variable.
fn emit_clear(out: &mut Vec<ReorgInstruction>, var: &LayoutVariable) {
    match &var.descriptor {
        TypeDescriptor::Value { width } => out.push(ReorgInstruction::ClearValue {
            slot: var.slot,
            offset: var.offset,
            width: *width,
        }),
        TypeDescriptor::Bool => out.push(ReorgInstruction::ClearValue {
            slot: var.slot,
            offset: var.offset,
            width: 1,
        }),
        TypeDescriptor::FixedArray { elem_width, length } => {
            for k in 0..slots_for_elems(*elem_width, *length as u64) {
                out.push(ReorgInstruction::ClearValue {
                    slot: var.slot.wrapping_add(k as u128),
                    offset: 0,
                    width: bytes_used_in_slot(*elem_width, *length as u64, k),
                });
            }
        }
        TypeDescriptor::DynArray { elem_width } => out.push(ReorgInstruction::ClearDynArea {
            header: var.slot,
            elem_width: *elem_width,
        }),
        TypeDescriptor::Bytes => out.push(ReorgInstruction::ClearBytesArea { header: var.slot }),
        // Mapping entries are not enumerable, so only the header position is
        // cleared; it doubles as the explicit drop marker in the plan.
        TypeDescriptor::Mapping { .. } => out.push(ReorgInstruction::ClearValue {
            slot: var.slot,
            offset: 0,
            width: 32,
        }),
    }
}

/// Compares two layouts and produces the plan aligning old storage with the
/// new layout.
///
/// Variables are matched by exact name. A matched variable must keep its
/// descriptor unless it is in `dropped`; a matched mapping must keep its
/// header slot. Old names absent from the new layout must be in `dropped`:
/// data loss is always explicit. New-only names need no instruction, since
/// absent slots read as zero.
pub fn diff_layouts(
    old: &StorageLayout,
    new: &StorageLayout,
    dropped: &BTreeSet<String>,
) -> Result<ReorgPlan, PlanError> {
    for name in dropped {
        if !old.contains(name) {
            return Err(PlanError::UnknownDropped(name.clone()));
        }
    }

    let mut instructions = Vec::new();
    for old_var in old.variables() {
        if dropped.contains(&old_var.name) {
            emit_clear(&mut instructions, old_var);
            continue;
        }
        match new.get(&old_var.name) {
            None => return Err(PlanError::RemovedWithoutDrop(old_var.name.clone())),
            Some(new_var) => {
                if new_var.descriptor != old_var.descriptor {
                    return Err(PlanError::TypeChangedWithoutDrop(old_var.name.clone()));
                }
                if old_var.descriptor.is_mapping() && new_var.slot != old_var.slot {
                    return Err(PlanError::MappingRelocated(old_var.name.clone()));
                }
                emit_move(&mut instructions, old_var, new_var);
            }
        }
    }

    Ok(ReorgPlan {
        instructions,
        old_layout_digest: old.digest(),
        new_layout_digest: new.digest(),
    })
}

/// Re-derives the plan implied by `old`, `new`, and the drop set read off
/// the plan's clear targets, and accepts `plan` only on an exact match with
/// matching digests.
pub fn verify_plan(old: &StorageLayout, new: &StorageLayout, plan: &ReorgPlan) -> bool {
    if plan.old_layout_digest != old.digest() || plan.new_layout_digest != new.digest() {
        return false;
    }
    let mut dropped = BTreeSet::new();
    for instr in &plan.instructions {
        let target = match instr {
            ReorgInstruction::ClearValue { slot, offset, .. } => Some((*slot, *offset)),
            ReorgInstruction::ClearDynArea { header, .. }
            | ReorgInstruction::ClearBytesArea { header } => Some((*header, 0)),
            _ => None,
        };
        if let Some((slot, offset)) = target {
            match owner_of(old, slot, offset) {
                Some(name) => {
                    dropped.insert(name.to_string());
                }
                None => return false,
            }
        }
    }
    match diff_layouts(old, new, &dropped) {
        Ok(expected) => expected == *plan,
        Err(_) => false,
    }
}

/// The old-layout variable whose assigned area contains (slot, offset).
fn owner_of(layout: &StorageLayout, slot: SlotKey, offset: u8) -> Option<&str> {
    for var in layout.variables() {
        let owns = match &var.descriptor {
            TypeDescriptor::Value { .. } | TypeDescriptor::Bool => {
                var.slot == slot && var.offset == offset
            }
            TypeDescriptor::FixedArray { elem_width, length } => {
                offset == 0
                    && (0..slots_for_elems(*elem_width, *length as u64))
                        .any(|k| var.slot.wrapping_add(k as u128) == slot)
            }
            TypeDescriptor::DynArray { .. }
            | TypeDescriptor::Bytes
            | TypeDescriptor::Mapping { .. } => var.slot == slot && offset == 0,
        };
        if owns {
            return Some(&var.name);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{assign_layout, VariableDecl};

    fn value(w: u8) -> TypeDescriptor {
        TypeDescriptor::Value { width: w }
    }

    fn layout_of(decls: &[(&str, TypeDescriptor)]) -> StorageLayout {
        let decls: Vec<VariableDecl> = decls
            .iter()
            .map(|(n, d)| VariableDecl::new(*n, d.clone()))
            .collect();
        assign_layout(&decls).unwrap()
    }

    fn no_drops() -> BTreeSet<String> {
        BTreeSet::new()
    }

    #[test]
    fn identity_diff_is_empty() {
        let layout = layout_of(&[("a", value(32))]);
        let plan = diff_layouts(&layout, &layout, &no_drops()).unwrap();
        assert!(plan.instructions.is_empty());
        assert_eq!(plan_stats(&plan).total, 0);
        assert!(verify_plan(&layout, &layout, &plan));
    }

    #[test]
    fn packed_swap_yields_two_copies() {
        let old = layout_of(&[("a", value(16)), ("b", value(16))]);
        let new = layout_of(&[("b", value(16)), ("a", value(16))]);
        let plan = diff_layouts(&old, &new, &no_drops()).unwrap();
        assert_eq!(
            plan.instructions,
            vec![
                ReorgInstruction::CopyValue {
                    old_slot: SlotKey::ZERO,
                    old_offset: 0,
                    new_slot: SlotKey::ZERO,
                    new_offset: 16,
                    width: 16,
                },
                ReorgInstruction::CopyValue {
                    old_slot: SlotKey::ZERO,
                    old_offset: 16,
                    new_slot: SlotKey::ZERO,
                    new_offset: 0,
                    width: 16,
                },
            ]
        );
    }

    #[test]
    fn two_variable_swap_produces_two_instructions() {
        let old = layout_of(&[("owner", value(20)), ("total", value(32))]);
        let new = layout_of(&[("total", value(32)), ("owner", value(20))]);
        let plan = diff_layouts(&old, &new, &no_drops()).unwrap();
        assert_eq!(plan_stats(&plan).total, 2);
        assert_eq!(plan_stats(&plan).copy_value, 2);
    }

    #[test]
    fn dropped_variables_clear_their_locations() {
        let old = layout_of(&[
            ("keep", value(32)),
            ("gone", TypeDescriptor::FixedArray { elem_width: 32, length: 3 }),
            ("bye", TypeDescriptor::Bytes),
        ]);
        let new = layout_of(&[("keep", value(32))]);
        let dropped: BTreeSet<String> = ["gone", "bye"].iter().map(|s| s.to_string()).collect();
        let plan = diff_layouts(&old, &new, &dropped).unwrap();
        let stats = plan_stats(&plan);
        assert_eq!(stats.clear_value, 3);
        assert_eq!(stats.clear_bytes_area, 1);
        assert_eq!(stats.total, 4);
        assert!(verify_plan(&old, &new, &plan));
    }

    #[test]
    fn removal_without_drop_is_an_error() {
        let old = layout_of(&[("a", value(32)), ("b", value(32))]);
        let new = layout_of(&[("a", value(32))]);
        assert_eq!(
            diff_layouts(&old, &new, &no_drops()).unwrap_err(),
            PlanError::RemovedWithoutDrop("b".into())
        );
    }

    #[test]
    fn type_change_requires_drop() {
        let old = layout_of(&[("a", value(32))]);
        let new = layout_of(&[("a", value(16))]);
        assert_eq!(
            diff_layouts(&old, &new, &no_drops()).unwrap_err(),
            PlanError::TypeChangedWithoutDrop("a".into())
        );
        // explicit drop makes the same change legal: clear + fresh zero var
        let dropped: BTreeSet<String> = ["a".to_string()].into_iter().collect();
        let plan = diff_layouts(&old, &new, &dropped).unwrap();
        assert_eq!(plan_stats(&plan).clear_value, 1);
        assert!(verify_plan(&old, &new, &plan));
    }

    #[test]
    fn mapping_must_keep_its_header_slot() {
        let m = TypeDescriptor::Mapping { key_kind: "bytes32".into(), value_width: 32 };
        let old = layout_of(&[("a", value(32)), ("m", m.clone())]);
        let new = layout_of(&[("m", m.clone()), ("a", value(32))]);
        assert_eq!(
            diff_layouts(&old, &new, &no_drops()).unwrap_err(),
            PlanError::MappingRelocated("m".into())
        );

        // unmoved mapping yields no instruction
        let new_same = layout_of(&[("a", value(16)), ("m", m)]);
        let plan = diff_layouts(&old, &new_same, &{
            let mut d = BTreeSet::new();
            d.insert("a".to_string());
            d
        })
        .unwrap();
        // `a` dropped (type change), mapping pinned: one clear only
        assert_eq!(plan_stats(&plan).total, 1);
    }

    #[test]
    fn unknown_dropped_name_rejected() {
        let old = layout_of(&[("a", value(32))]);
        assert_eq!(
            diff_layouts(&old, &old, &["x".to_string()].into_iter().collect()).unwrap_err(),
            PlanError::UnknownDropped("x".into())
        );
    }

    #[test]
    fn verify_detects_tampering() {
        let old = layout_of(&[
            ("a", value(32)),
            ("d", TypeDescriptor::DynArray { elem_width: 32 }),
        ]);
        let new = layout_of(&[
            ("d", TypeDescriptor::DynArray { elem_width: 32 }),
            ("a", value(32)),
        ]);
        let plan = diff_layouts(&old, &new, &no_drops()).unwrap();
        assert!(verify_plan(&old, &new, &plan));

        let mut missing = plan.clone();
        missing.instructions.pop();
        assert!(!verify_plan(&old, &new, &missing));

        let mut reordered = plan.clone();
        reordered.instructions.reverse();
        assert!(!verify_plan(&old, &new, &reordered));

        // digests bound to different layouts
        let other = layout_of(&[("z", value(8))]);
        let mut wrong_digest = plan.clone();
        wrong_digest.old_layout_digest = other.digest();
        assert!(!verify_plan(&old, &new, &wrong_digest));

        // clear of a location the old layout does not own
        let mut stray = plan;
        stray.instructions.push(ReorgInstruction::ClearValue {
            slot: SlotKey::from_u64(99),
            offset: 0,
            width: 32,
        });
        assert!(!verify_plan(&old, &new, &stray));
    }

    #[test]
    fn plan_canonical_round_trip() {
        let old = layout_of(&[
            ("a", value(16)),
            ("b", TypeDescriptor::Bytes),
            ("c", TypeDescriptor::DynArray { elem_width: 8 }),
        ]);
        let new = layout_of(&[
            ("c", TypeDescriptor::DynArray { elem_width: 8 }),
            ("b", TypeDescriptor::Bytes),
            ("a", value(16)),
        ]);
        let plan = diff_layouts(&old, &new, &no_drops()).unwrap();
        let mut enc = Encoder::new();
        plan.canon_encode(&mut enc);
        let data = enc.finish();
        let mut dec = Decoder::new(&data);
        let back = ReorgPlan::canon_decode(&mut dec).unwrap();
        dec.expect_end().unwrap();
        assert_eq!(back, plan);
    }
}
