//! The scene configuration file consumed by the simulate and sweep commands.
//!
//! Every field is optional; omitted fields fall back to the reference rig,
//! so `{}` is a valid config describing the default scene.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::common::{point2_from, BoardDto, IntrinsicsDto};
use super::{require_finite, FormatError};
use crate::geometry::{EulerAnglesXYZ, Point3};
use crate::simulator::{DevicePose, SceneConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseDto {
    euler_xyz_deg: [f64; 3],
    center_mm: [f64; 3],
}

impl PoseDto {
    fn to_domain(&self, what: &str) -> Result<DevicePose, FormatError> {
        for (i, v) in self.euler_xyz_deg.iter().chain(&self.center_mm).enumerate() {
            require_finite(*v, &format!("{what} component {i}"))?;
        }
        Ok(DevicePose {
            euler_deg: EulerAnglesXYZ::new(
                self.euler_xyz_deg[0],
                self.euler_xyz_deg[1],
                self.euler_xyz_deg[2],
            ),
            center_mm: Point3::new(self.center_mm[0], self.center_mm[1], self.center_mm[2]),
        })
    }

    fn from_domain(pose: &DevicePose) -> Self {
        Self {
            euler_xyz_deg: [pose.euler_deg.psi, pose.euler_deg.nu, pose.euler_deg.phi],
            center_mm: [pose.center_mm.x, pose.center_mm.y, pose.center_mm.z],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SceneDistortionDto {
    #[serde(default)]
    k1: Option<f64>,
    #[serde(default)]
    k2: Option<f64>,
    #[serde(default)]
    center: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SceneCameraDto {
    #[serde(default)]
    width: Option<u32>,
    #[serde(default)]
    height: Option<u32>,
    #[serde(default)]
    intrinsics: Option<IntrinsicsDto>,
    #[serde(default)]
    distortion: Option<SceneDistortionDto>,
    #[serde(default)]
    pose: Option<PoseDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SceneProjectorDto {
    #[serde(default)]
    width: Option<u32>,
    #[serde(default)]
    height: Option<u32>,
    #[serde(default)]
    intrinsics: Option<IntrinsicsDto>,
    #[serde(default)]
    pose: Option<PoseDto>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SceneFileDto {
    #[serde(default)]
    board: Option<BoardDto>,
    #[serde(default)]
    camera: Option<SceneCameraDto>,
    #[serde(default)]
    projector: Option<SceneProjectorDto>,
    #[serde(default)]
    noise_sigma_px: Option<f64>,
    #[serde(default)]
    rng_seed: Option<u64>,
    #[serde(default)]
    principal_point_offset_px: Option<f64>,
}

/// Parses a scene config, filling omitted fields from the reference rig.
pub fn scene_from_json(bytes: &[u8]) -> Result<SceneConfig, FormatError> {
    let dto: SceneFileDto =
        serde_json::from_slice(bytes).map_err(|e| FormatError::json(e.to_string()))?;
    let mut cfg = SceneConfig::reference_rig();

    if let Some(board) = dto.board {
        cfg.board = board.to_domain()?;
    }
    if let Some(camera) = dto.camera {
        if let Some(w) = camera.width {
            cfg.camera.dims.width = w;
        }
        if let Some(h) = camera.height {
            cfg.camera.dims.height = h;
        }
        if let Some(k) = camera.intrinsics {
            cfg.camera.intrinsics = k.to_domain("camera.intrinsics")?;
        }
        if let Some(d) = camera.distortion {
            if let Some(k1) = d.k1 {
                cfg.camera.k1 = require_finite(k1, "camera.distortion.k1")?;
            }
            if let Some(k2) = d.k2 {
                cfg.camera.k2 = require_finite(k2, "camera.distortion.k2")?;
            }
            if let Some(c) = d.center {
                cfg.camera.distortion_center = Some(point2_from(c, "camera.distortion.center")?);
            }
        }
        if let Some(pose) = camera.pose {
            cfg.camera.pose = pose.to_domain("camera.pose")?;
        }
    }
    if let Some(projector) = dto.projector {
        if let Some(w) = projector.width {
            cfg.projector.dims.width = w;
        }
        if let Some(h) = projector.height {
            cfg.projector.dims.height = h;
        }
        if let Some(k) = projector.intrinsics {
            cfg.projector.intrinsics = k.to_domain("projector.intrinsics")?;
        }
        if let Some(pose) = projector.pose {
            cfg.projector.pose = pose.to_domain("projector.pose")?;
        }
    }
    if let Some(noise) = dto.noise_sigma_px {
        let noise = require_finite(noise, "noise_sigma_px")?;
        if noise < 0.0 {
            return Err(FormatError::schema("noise_sigma_px must be non-negative"));
        }
        cfg.noise_sigma_px = noise;
    }
    if let Some(seed) = dto.rng_seed {
        cfg.rng_seed = seed;
    }
    if let Some(offset) = dto.principal_point_offset_px {
        cfg.principal_point_offset_px = require_finite(offset, "principal_point_offset_px")?;
    }
    Ok(cfg)
}

/// Serializes a full scene config (all fields explicit).
pub fn scene_to_json(cfg: &SceneConfig) -> Vec<u8> {
    let dto = SceneFileDto {
        board: Some(BoardDto::from_domain(&cfg.board)),
        camera: Some(SceneCameraDto {
            width: Some(cfg.camera.dims.width),
            height: Some(cfg.camera.dims.height),
            intrinsics: Some(IntrinsicsDto::from_domain(&cfg.camera.intrinsics)),
            distortion: Some(SceneDistortionDto {
                k1: Some(cfg.camera.k1),
                k2: Some(cfg.camera.k2),
                center: cfg.camera.distortion_center.map(|c| [c.u, c.v]),
            }),
            pose: Some(PoseDto::from_domain(&cfg.camera.pose)),
        }),
        projector: Some(SceneProjectorDto {
            width: Some(cfg.projector.dims.width),
            height: Some(cfg.projector.dims.height),
            intrinsics: Some(IntrinsicsDto::from_domain(&cfg.projector.intrinsics)),
            pose: Some(PoseDto::from_domain(&cfg.projector.pose)),
        }),
        noise_sigma_px: Some(cfg.noise_sigma_px),
        rng_seed: Some(cfg.rng_seed),
        principal_point_offset_px: Some(cfg.principal_point_offset_px),
    };
    let mut bytes = serde_json::to_vec_pretty(&dto).expect("serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

pub fn load_scene_config(path: impl AsRef<Path>) -> Result<SceneConfig, FormatError> {
    let bytes = super::read_bytes(&path)?;
    scene_from_json(&bytes).map_err(|e| e.with_path(path))
}

pub fn save_scene_config(path: impl AsRef<Path>, cfg: &SceneConfig) -> Result<(), FormatError> {
    super::write_bytes(path, &scene_to_json(cfg))
}
