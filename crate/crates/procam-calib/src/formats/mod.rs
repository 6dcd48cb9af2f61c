//! On-disk formats: JSON schemas for correspondences, calibrations, scene
//! configs, stack manifests and corner lists; binary PGM (P5) images; CSV
//! tables for sweeps and evaluation reports.
//!
//! All JSON documents carry a `schema_version` field and are validated on
//! load (counts, finiteness, rotation invariants). Floating-point values are
//! serialized in shortest round-trip decimal form, so a write/read cycle
//! reproduces every numeric field exactly.

mod calibration;
mod common;
mod corners;
mod correspondence;
mod manifest;
mod pgm;
mod scene;
mod tables;

pub use calibration::{
    calibration_from_json, calibration_to_json, load_calibration, save_calibration,
    CalibrationFile, LoadedCalibration,
};
pub use corners::{corners_from_json, load_corners, save_corners, CornersFile};
pub use correspondence::{
    correspondence_from_json, correspondence_parts_to_json, correspondence_to_json,
    load_correspondences, save_correspondences,
};
pub use manifest::{load_manifest, manifest_from_json, save_manifest, SlotDto, StackManifest};
pub use pgm::{parse_pgm, read_pgm_file, write_pgm, write_pgm_file};
pub use scene::{load_scene_config, save_scene_config, scene_from_json, scene_to_json};
pub use tables::{write_evaluation_csv, write_sweep_csv, EvaluationReport, PoseReport};

use std::path::{Path, PathBuf};
use thiserror::Error;

/// Current version of every JSON schema in this module.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("i/o error{}: {source}", path_suffix(path))]
    Io {
        path: Option<PathBuf>,
        source: std::io::Error,
    },
    #[error("malformed JSON{}: {message}", path_suffix(path))]
    Json {
        path: Option<PathBuf>,
        message: String,
    },
    #[error("schema violation{}: {message}", path_suffix(path))]
    Schema {
        path: Option<PathBuf>,
        message: String,
    },
}

fn path_suffix(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!(" in {}", p.display()),
        None => String::new(),
    }
}

impl FormatError {
    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: Some(path.as_ref().to_path_buf()),
            source,
        }
    }

    pub(crate) fn json(message: impl Into<String>) -> Self {
        Self::Json {
            path: None,
            message: message.into(),
        }
    }

    pub(crate) fn schema(message: impl Into<String>) -> Self {
        Self::Schema {
            path: None,
            message: message.into(),
        }
    }

    /// Attaches a file path to an error produced by a byte-level parser.
    pub(crate) fn with_path(self, path: impl AsRef<Path>) -> Self {
        let p = Some(path.as_ref().to_path_buf());
        match self {
            Self::Io { source, .. } => Self::Io { path: p, source },
            Self::Json { message, .. } => Self::Json { path: p, message },
            Self::Schema { message, .. } => Self::Schema { path: p, message },
        }
    }
}

pub(crate) fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path.as_ref()).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path.as_ref(), bytes).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn require_finite(value: f64, what: &str) -> Result<f64, FormatError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(FormatError::schema(format!(
            "{what} must be finite, got {value}"
        )))
    }
}
