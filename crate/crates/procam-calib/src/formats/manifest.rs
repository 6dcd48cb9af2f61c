//! The stack manifest: projector geometry, frame roles, and the PGM file
//! paths of a captured (or rendered) Gray-code sequence in layout order.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::common::DimsDto;
use super::{FormatError, SCHEMA_VERSION};
use crate::structured_light::{Axis, PatternLayout, PatternSlot};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlotDto {
    Bit {
        axis: AxisDto,
        bit: u8,
        inverted: bool,
    },
    White,
    Black,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AxisDto {
    Column,
    Row,
}

impl SlotDto {
    fn to_domain(&self) -> PatternSlot {
        match self {
            SlotDto::White => PatternSlot::White,
            SlotDto::Black => PatternSlot::Black,
            SlotDto::Bit {
                axis,
                bit,
                inverted,
            } => PatternSlot::Bit {
                axis: match axis {
                    AxisDto::Column => Axis::Column,
                    AxisDto::Row => Axis::Row,
                },
                bit: *bit,
                inverted: *inverted,
            },
        }
    }

    fn from_domain(slot: &PatternSlot) -> Self {
        match slot {
            PatternSlot::White => SlotDto::White,
            PatternSlot::Black => SlotDto::Black,
            PatternSlot::Bit {
                axis,
                bit,
                inverted,
            } => SlotDto::Bit {
                axis: match axis {
                    Axis::Column => AxisDto::Column,
                    Axis::Row => AxisDto::Row,
                },
                bit: *bit,
                inverted: *inverted,
            },
        }
    }
}

/// Manifest document listing a pattern stack on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackManifest {
    pub schema_version: u32,
    pub projector: DimsDto,
    pub slots: Vec<SlotDto>,
    /// One path per slot, in layout order, relative to the manifest file.
    pub files: Vec<String>,
}

impl StackManifest {
    pub fn new(layout: &PatternLayout, files: Vec<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            projector: DimsDto {
                width: layout.projector_width,
                height: layout.projector_height,
            },
            slots: layout.slots.iter().map(SlotDto::from_domain).collect(),
            files,
        }
    }

    pub fn layout(&self) -> Result<PatternLayout, FormatError> {
        let dims = self.projector.to_domain("projector")?;
        Ok(PatternLayout {
            projector_width: dims.width,
            projector_height: dims.height,
            slots: self.slots.iter().map(SlotDto::to_domain).collect(),
        })
    }
}

pub fn manifest_from_json(bytes: &[u8]) -> Result<StackManifest, FormatError> {
    let dto: StackManifest =
        serde_json::from_slice(bytes).map_err(|e| FormatError::json(e.to_string()))?;
    if dto.schema_version != SCHEMA_VERSION {
        return Err(FormatError::schema(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            dto.schema_version
        )));
    }
    if dto.files.len() != dto.slots.len() {
        return Err(FormatError::schema(format!(
            "manifest lists {} files for {} slots",
            dto.files.len(),
            dto.slots.len()
        )));
    }
    dto.projector.to_domain("projector")?;
    Ok(dto)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<StackManifest, FormatError> {
    let bytes = super::read_bytes(&path)?;
    manifest_from_json(&bytes).map_err(|e| e.with_path(path))
}

pub fn save_manifest(path: impl AsRef<Path>, manifest: &StackManifest) -> Result<(), FormatError> {
    let mut bytes = serde_json::to_vec_pretty(manifest).expect("serialization cannot fail");
    bytes.push(b'\n');
    super::write_bytes(path, &bytes)
}
