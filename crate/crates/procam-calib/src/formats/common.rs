//! DTOs shared between the JSON schemas, with validated conversions to and
//! from the domain types.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{require_finite, FormatError};
use crate::distortion::DivisionModel;
use crate::geometry::{
    matrix_to_euler_xyz, Intrinsics, Point2, Point3, RigidTransform, RotationMatrix,
};
use crate::structured_light::{BoardSpec, ImageDims};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardDto {
    pub rows: u32,
    pub cols: u32,
    pub spacing_mm: f64,
}

impl BoardDto {
    pub fn to_domain(self) -> Result<BoardSpec, FormatError> {
        if self.rows < 2 || self.cols < 2 {
            return Err(FormatError::schema(format!(
                "board must have at least 2x2 corners, got {}x{}",
                self.rows, self.cols
            )));
        }
        let spacing = require_finite(self.spacing_mm, "board.spacing_mm")?;
        if spacing <= 0.0 {
            return Err(FormatError::schema("board.spacing_mm must be positive"));
        }
        Ok(BoardSpec {
            rows: self.rows,
            cols: self.cols,
            spacing_mm: spacing,
        })
    }

    pub fn from_domain(b: &BoardSpec) -> Self {
        Self {
            rows: b.rows,
            cols: b.cols,
            spacing_mm: b.spacing_mm,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsDto {
    pub width: u32,
    pub height: u32,
}

impl DimsDto {
    pub fn to_domain(self, what: &str) -> Result<ImageDims, FormatError> {
        if self.width < 2 || self.height < 2 {
            return Err(FormatError::schema(format!(
                "{what} dimensions must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(ImageDims::new(self.width, self.height))
    }

    pub fn from_domain(d: ImageDims) -> Self {
        Self {
            width: d.width,
            height: d.height,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsDto {
    pub f: f64,
    pub alpha: f64,
    pub u0: f64,
    pub v0: f64,
}

impl IntrinsicsDto {
    pub fn to_domain(self, what: &str) -> Result<Intrinsics, FormatError> {
        Intrinsics::new(self.f, self.alpha, self.u0, self.v0)
            .map_err(|e| FormatError::schema(format!("{what}: {e}")))
    }

    pub fn from_domain(k: &Intrinsics) -> Self {
        Self {
            f: k.f,
            alpha: k.alpha,
            u0: k.u0,
            v0: k.v0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistortionDto {
    pub center: [f64; 2],
    pub k1: f64,
    pub k2: f64,
}

impl DistortionDto {
    pub fn to_domain(self, dims: ImageDims, what: &str) -> Result<DivisionModel, FormatError> {
        DivisionModel::new(
            Point2::new(
                require_finite(self.center[0], "distortion center u")?,
                require_finite(self.center[1], "distortion center v")?,
            ),
            require_finite(self.k1, "k1")?,
            require_finite(self.k2, "k2")?,
            dims.width,
            dims.height,
        )
        .map_err(|e| FormatError::schema(format!("{what}: {e}")))
    }

    pub fn from_domain(m: &DivisionModel) -> Self {
        Self {
            center: [m.center().u, m.center().v],
            k1: m.k1(),
            k2: m.k2(),
        }
    }
}

/// A rigid transform with its rotation stored row-major; the Euler block is
/// derived on save and ignored on load (the matrix is authoritative), kept
/// null when the decomposition is gimbal-locked.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformDto {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub euler_xyz_deg: Option<[f64; 3]>,
}

impl TransformDto {
    pub fn to_domain(&self, what: &str) -> Result<RigidTransform, FormatError> {
        for (i, v) in self.rotation.iter().enumerate() {
            require_finite(*v, &format!("{what} rotation[{i}]"))?;
        }
        let m = Matrix3::from_row_slice(&self.rotation);
        let rotation = RotationMatrix::from_matrix(m)
            .map_err(|e| FormatError::schema(format!("{what}: {e}")))?;
        let t = Point3::new(
            require_finite(self.translation[0], "translation x")?,
            require_finite(self.translation[1], "translation y")?,
            require_finite(self.translation[2], "translation z")?,
        );
        Ok(RigidTransform::new(rotation, t))
    }

    pub fn from_domain(rt: &RigidTransform) -> Self {
        let m = rt.rotation.matrix();
        let mut rotation = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                rotation[r * 3 + c] = m[(r, c)];
            }
        }
        let euler = matrix_to_euler_xyz(&rt.rotation)
            .ok()
            .map(|e| [e.psi, e.nu, e.phi]);
        Self {
            rotation,
            translation: [rt.translation.x, rt.translation.y, rt.translation.z],
            euler_xyz_deg: euler,
        }
    }
}

pub fn point2_from(arr: [f64; 2], what: &str) -> Result<Point2, FormatError> {
    Ok(Point2::new(
        require_finite(arr[0], what)?,
        require_finite(arr[1], what)?,
    ))
}
