//! The corners file: subpixel chessboard corner positions in the camera
//! frame, row-major in board order, plus the board geometry they index.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::common::{point2_from, BoardDto};
use super::{FormatError, SCHEMA_VERSION};
use crate::geometry::Point2;
use crate::structured_light::BoardSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CornersFile {
    pub schema_version: u32,
    pub board: BoardDto,
    pub corners: Vec<[f64; 2]>,
}

impl CornersFile {
    pub fn new(board: &BoardSpec, corners: &[Point2]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            board: BoardDto::from_domain(board),
            corners: corners.iter().map(|c| [c.u, c.v]).collect(),
        }
    }

    pub fn to_domain(&self) -> Result<(BoardSpec, Vec<Point2>), FormatError> {
        let board = self.board.to_domain()?;
        if self.corners.len() != board.corner_count() {
            return Err(FormatError::schema(format!(
                "corners has {} entries for a {}x{} board (expected {})",
                self.corners.len(),
                board.rows,
                board.cols,
                board.corner_count()
            )));
        }
        let corners = self
            .corners
            .iter()
            .enumerate()
            .map(|(i, c)| point2_from(*c, &format!("corners[{i}]")))
            .collect::<Result<_, _>>()?;
        Ok((board, corners))
    }
}

pub fn corners_from_json(bytes: &[u8]) -> Result<CornersFile, FormatError> {
    let dto: CornersFile =
        serde_json::from_slice(bytes).map_err(|e| FormatError::json(e.to_string()))?;
    if dto.schema_version != SCHEMA_VERSION {
        return Err(FormatError::schema(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            dto.schema_version
        )));
    }
    Ok(dto)
}

pub fn load_corners(path: impl AsRef<Path>) -> Result<CornersFile, FormatError> {
    let bytes = super::read_bytes(&path)?;
    corners_from_json(&bytes).map_err(|e| e.with_path(path))
}

pub fn save_corners(path: impl AsRef<Path>, file: &CornersFile) -> Result<(), FormatError> {
    let mut bytes = serde_json::to_vec_pretty(file).expect("serialization cannot fail");
    bytes.push(b'\n');
    super::write_bytes(path, &bytes)
}
